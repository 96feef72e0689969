#include "dcpl/synthbench.hpp"

#include <cmath>
#include <numeric>

#include "dcpl/error.hpp"
#include "dcpl/rng.hpp"

namespace dcpl {

namespace {

Vec random_unit(SplitMix64& rng, std::size_t d) {
  Vec v(d);
  double n = 0.0;
  while (n < 1e-8) {
    for (double& x : v) x = rng.normal();
    n = norm2(v);
  }
  for (double& x : v) x /= n;
  return v;
}

// Gram-Schmidt on Gaussian draws; falls back to plain random unit vectors
// once the space is exhausted (count > d).
std::vector<Vec> random_directions(SplitMix64& rng, std::size_t count, std::size_t d) {
  std::vector<Vec> out;
  while (out.size() < count) {
    Vec v = random_unit(rng, d);
    if (out.size() < d) {
      for (const Vec& u : out) {
        const double p = dot(v, u);
        for (std::size_t i = 0; i < d; ++i) v[i] -= p * u[i];
      }
      const double n = norm2(v);
      if (n < 1e-6) continue;
      for (double& x : v) x /= n;
    }
    out.push_back(std::move(v));
  }
  return out;
}

// Rotation by angle in the plane spanned by orthonormal u, w.
Mat plane_rotation(const Vec& u, const Vec& w, double angle) {
  const std::size_t d = u.size();
  Mat r = Mat::identity(d);
  const double c = std::cos(angle) - 1.0;
  const double s = std::sin(angle);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      r(i, j) += c * (u[i] * u[j] + w[i] * w[j]) + s * (w[i] * u[j] - u[i] * w[j]);
  return r;
}

struct Geometry {
  std::vector<Vec> means;  // k x d_f
  Mat projection;          // d_p x d_f
  Mat rotation;            // d_f x d_f
  Vec translation;         // d_f
};

Geometry sample_geometry(const SynthConfig& cfg, SplitMix64& rng) {
  Geometry g;
  const double radius = cfg.class_separation / std::sqrt(2.0);
  g.means = random_directions(rng, cfg.k, cfg.d_f);
  for (Vec& m : g.means)
    for (double& x : m) x *= radius;

  g.projection = Mat(cfg.d_p, cfg.d_f);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_f));
  for (double& x : g.projection.values()) x = rng.normal() * scale;

  const auto plane = random_directions(rng, 2, cfg.d_f);
  g.rotation = plane_rotation(plane[0], plane[1], cfg.shift_rotation);
  g.translation.resize(cfg.d_f);
  for (double& t : g.translation) t = (rng.uniform() < 0.5 ? -1.0 : 1.0) * cfg.shift_translation;
  return g;
}

Dataset sample_domain(const SynthConfig& cfg, const Geometry& g, std::size_t n, bool shifted,
                      SplitMix64& rng) {
  Labels labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % cfg.k;
  rng.shuffle(std::span<std::size_t>(labels));

  Dataset ds;
  ds.k = cfg.k;
  ds.features_f = Mat(n, cfg.d_f);
  ds.features_p = Mat(n, cfg.d_p);
  Vec x(cfg.d_f);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec& mu = g.means[labels[i]];
    for (std::size_t j = 0; j < cfg.d_f; ++j) x[j] = mu[j] + rng.normal();
    auto f = ds.features_f.row(i);
    if (shifted) {
      for (std::size_t r = 0; r < cfg.d_f; ++r) f[r] = dot(g.rotation.row(r), x) + g.translation[r];
    } else {
      std::copy(x.begin(), x.end(), f.begin());
    }
    auto p = ds.features_p.row(i);
    for (std::size_t r = 0; r < cfg.d_p; ++r)
      p[r] = dot(g.projection.row(r), mu) + cfg.pretrained_noise * rng.normal();
  }
  ds.true_labels = std::move(labels);
  ds.projection = g.projection;
  return ds;
}

}  // namespace

void SynthConfig::validate() const {
  auto need = [](bool ok, const char* field, const char* rule) {
    if (!ok) throw ArgumentError(std::string("synth config '") + field + "' must be " + rule);
  };
  need(k >= 2, "k", ">= 2");
  need(d_f >= 2, "d_f", ">= 2");
  need(d_p >= 2, "d_p", ">= 2");
  need(n_source >= 1, "n_source", ">= 1");
  need(n_target >= 1, "n_target", ">= 1");
  need(class_separation > 0.0 && std::isfinite(class_separation), "class_separation", "> 0");
  need(shift_translation >= 0.0 && std::isfinite(shift_translation), "shift_translation", ">= 0");
  need(std::isfinite(shift_rotation), "shift_rotation", "finite");
  need(pretrained_noise >= 0.0 && std::isfinite(pretrained_noise), "pretrained_noise", ">= 0");
}

SynthPair generate_pair(const SynthConfig& cfg) {
  cfg.validate();
  SplitMix64 root(cfg.seed);
  SplitMix64 geo_rng = root.fork(1);
  SplitMix64 src_rng = root.fork(2);
  SplitMix64 tgt_rng = root.fork(3);
  const Geometry g = sample_geometry(cfg, geo_rng);
  SynthPair pair;
  pair.source = sample_domain(cfg, g, cfg.n_source, false, src_rng);
  pair.target = sample_domain(cfg, g, cfg.n_target, true, tgt_rng);
  return pair;
}

ModelParams train_source_head(const Dataset& source, const HyperParams& hp) {
  if (!source.true_labels) throw ArgumentError("train_source_head: source dataset has no labels");
  validate(source);
  hp.validate();
  const std::size_t n = source.n();
  ModelParams head(source.k, source.d_f());
  OptimizerState opt(hp.sgd(), source.k, source.d_f());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(hp.seed);

  Mat xb;
  Labels yb;
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t lo = 0; lo < n; lo += hp.batch_size) {
      const std::size_t hi = std::min(n, lo + hp.batch_size);
      const std::size_t b = hi - lo;
      xb = Mat(b, source.d_f());
      yb.resize(b);
      for (std::size_t i = lo; i < hi; ++i) {
        const auto src = source.features_f.row(order[i]);
        std::copy(src.begin(), src.end(), xb.row(i - lo).begin());
        yb[i - lo] = (*source.true_labels)[order[i]];
      }
      // Softmax cross-entropy: dz = (p - onehot) / b.
      Mat probs = forward_probs(head, xb);
      ModelParams grad(source.k, source.d_f());
      const double inv_b = 1.0 / static_cast<double>(b);
      for (std::size_t i = 0; i < b; ++i) {
        auto p = probs.row(i);
        p[yb[i]] -= 1.0;
        const auto x = xb.row(i);
        for (std::size_t c = 0; c < source.k; ++c) {
          const double dz = p[c] * inv_b;
          auto w = grad.weights.row(c);
          for (std::size_t j = 0; j < x.size(); ++j) w[j] += dz * x[j];
          grad.bias[c] += dz;
        }
      }
      sgd_step(head, grad, opt);
    }
    if (!head.is_finite())
      throw NumericError("train_source_head: parameters diverged at epoch " + std::to_string(epoch));
  }
  return head;
}

OracleTransition oracle_transition(const Dataset& ds) {
  if (!ds.true_labels || !ds.pseudo_labels)
    throw ArgumentError("oracle_transition: needs both true and pseudo labels");
  const Labels& y = *ds.true_labels;
  const Labels& noisy = *ds.pseudo_labels;
  if (y.size() != noisy.size()) throw ArgumentError("oracle_transition: label arrays differ in length");
  const std::size_t k = ds.k;
  OracleTransition out;
  out.matrix = Mat(k, k);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] >= k || noisy[i] >= k) throw ArgumentError("oracle_transition: label out of range");
    out.matrix(noisy[i], y[i]) += 1.0;
    ++count[y[i]];
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (count[j] == 0) {
      out.matrix(j, j) = 1.0;
      out.warnings.push_back("true class " + std::to_string(j) +
                             " has no samples; oracle column set to one-hot");
      continue;
    }
    for (std::size_t i = 0; i < k; ++i) out.matrix(i, j) /= static_cast<double>(count[j]);
  }
  return out;
}

}  // namespace dcpl
