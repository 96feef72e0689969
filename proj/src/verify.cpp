#include "dcpl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dcpl/error.hpp"

namespace dcpl {

GradCheckReport finite_diff_gradcheck(const LossEvaluator& f, std::span<const double> point,
                                      double h, std::string group) {
  if (!(h >= 1e-7 && h <= 1e-3))
    throw ArgumentError("finite_diff_gradcheck: step h must lie in [1e-7, 1e-3]");
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> analytic(x.size(), 0.0);
  const double f0 = f(x, &analytic);
  const double f1 = f(x, nullptr);
  if (f0 != f1)
    throw ContractError("finite_diff_gradcheck: evaluator is not deterministic (" +
                        std::to_string(f0) + " vs " + std::to_string(f1) + ")");
  if (analytic.size() != x.size())
    throw ContractError("finite_diff_gradcheck: evaluator returned a gradient of wrong length");

  GradCheckReport report;
  report.group = std::move(group);
  report.h = h;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    // Divide by the representable step actually taken.
    const double hi = saved + h;
    const double lo = saved - h;
    x[i] = hi;
    const double fp = f(x, nullptr);
    x[i] = lo;
    const double fm = f(x, nullptr);
    x[i] = saved;
    const double numeric = (fp - fm) / (hi - lo);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-10});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (i == 0 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
      report.analytic_at_worst = analytic[i];
      report.numeric_at_worst = numeric;
    }
  }
  return report;
}

GradCheckCase make_gradcheck_case(SplitMix64& rng, std::size_t k, std::size_t d_f,
                                  std::size_t batch, double im_weight) {
  GradCheckCase c;
  c.params = ModelParams(k, d_f);
  for (double& w : c.params.weights.values()) w = 0.5 * rng.normal();
  for (double& b : c.params.bias) b = 0.2 * rng.normal();
  c.transition.logits = Mat(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      c.transition.logits(i, j) = (i == j ? 2.0 : 0.0) + rng.normal();
  c.prior.tau = 0.05;
  c.prior.matrix = Mat(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    Vec logits(k);
    for (std::size_t j = 0; j < k; ++j) logits[j] = (i == j ? 2.0 : 0.0) + rng.normal();
    const Vec row = softmax_temp(logits);
    std::copy(row.begin(), row.end(), c.prior.matrix.row(i).begin());
  }
  c.features = Mat(batch, d_f);
  for (double& x : c.features.values()) x = rng.normal();
  c.labels.resize(batch);
  for (auto& y : c.labels) y = static_cast<std::size_t>(rng.below(k));
  c.hp.lambda = rng.uniform(0.0, 0.5);
  c.hp.gamma = rng.uniform(0.0, 1.0);
  c.hp.im_weight = im_weight;
  c.hp.prior_transpose = rng.uniform() < 0.5;
  return c;
}

namespace {

using Wide = long double;

// Forward-only evaluation of the full objective in extended precision. It
// shares no code with the production loss, and its lower rounding error keeps
// central differences meaningful for coordinates whose gradient is near zero.
Wide reference_objective(const GradCheckCase& c, std::span<const double> w,
                         std::span<const double> bias, std::span<const double> t_logits) {
  const std::size_t k = c.params.num_classes();
  const std::size_t d = c.params.feature_dim();
  const std::size_t n = c.features.rows();

  std::vector<Wide> t(k * k);
  for (std::size_t j = 0; j < k; ++j) {
    Wide mx = t_logits[j];
    for (std::size_t i = 0; i < k; ++i) mx = std::max<Wide>(mx, t_logits[i * k + j]);
    Wide z = 0;
    for (std::size_t i = 0; i < k; ++i) z += std::exp(Wide(t_logits[i * k + j]) - mx);
    for (std::size_t i = 0; i < k; ++i) t[i * k + j] = std::exp(Wide(t_logits[i * k + j]) - mx) / z;
  }

  Wide ce = 0, cond = 0;
  std::vector<Wide> mean(k, 0), p(k);
  for (std::size_t s = 0; s < n; ++s) {
    Wide mx = -std::numeric_limits<Wide>::infinity();
    for (std::size_t a = 0; a < k; ++a) {
      Wide z = bias[a];
      for (std::size_t b = 0; b < d; ++b) z += Wide(w[a * d + b]) * c.features(s, b);
      p[a] = z;
      mx = std::max(mx, z);
    }
    Wide sum = 0;
    for (auto& v : p) sum += (v = std::exp(v - mx));
    for (std::size_t a = 0; a < k; ++a) {
      p[a] /= sum;
      mean[a] += p[a];
      if (p[a] > 0) cond -= p[a] * std::log(p[a]);
    }
    const std::size_t y = c.labels[s];
    Wide q = 0;
    for (std::size_t j = 0; j < k; ++j) q += t[y * k + j] * p[j];
    ce -= std::log(q + Wide(kLogFloor));
  }
  ce /= n;
  cond /= n;

  Wide trace = 0, prior = 0;
  for (std::size_t i = 0; i < k; ++i) {
    trace += t[i * k + i];
    for (std::size_t j = 0; j < k; ++j) {
      const Wide target = c.hp.prior_transpose ? c.prior.matrix(j, i) : c.prior.matrix(i, j);
      prior += (t[i * k + j] - target) * (t[i * k + j] - target);
    }
  }
  Wide marginal = 0;
  for (Wide m : mean) {
    m /= n;
    if (m > 0) marginal -= m * std::log(m);
  }
  return ce + Wide(c.hp.lambda) * trace + Wide(c.hp.gamma) * prior +
         Wide(c.hp.im_weight) * (cond - marginal);
}

}  // namespace

std::vector<GradCheckReport> gradcheck_total_loss(const GradCheckCase& c, double h) {
  const std::size_t nw = c.params.weights.size();
  const std::size_t nb = c.params.bias.size();
  const std::size_t nt = c.transition.logits.size();
  const Wide base =
      reference_objective(c, c.params.weights.values(), c.params.bias, c.transition.logits.values());

  // Packs every parameter group into one vector; each group is checked on
  // its own slice so the report names the failing group.
  auto make = [&](std::size_t offset, std::size_t count) {
    return [&c, offset, count, nw, nb, base](std::span<const double> slice,
                                       std::vector<double>* grad) {
      ModelParams p = c.params;
      TransitionParams t = c.transition;
      std::vector<double> all;
      all.insert(all.end(), p.weights.values().begin(), p.weights.values().end());
      all.insert(all.end(), p.bias.begin(), p.bias.end());
      all.insert(all.end(), t.logits.values().begin(), t.logits.values().end());
      std::copy(slice.begin(), slice.end(), all.begin() + static_cast<std::ptrdiff_t>(offset));
      std::copy(all.begin(), all.begin() + nw, p.weights.values().begin());
      std::copy(all.begin() + nw, all.begin() + nw + nb, p.bias.begin());
      std::copy(all.begin() + nw + nb, all.end(), t.logits.values().begin());
      // Offset by the value at the base point so the difference survives
      // the narrowing to double.
      const double value = static_cast<double>(
          reference_objective(c, p.weights.values(), p.bias, t.logits.values()) - base);
      if (grad) {
        const LossResult r = total_loss(p, t, c.prior, c.features, c.labels, c.hp);
        std::vector<double> g;
        g.insert(g.end(), r.grads.head.weights.values().begin(), r.grads.head.weights.values().end());
        g.insert(g.end(), r.grads.head.bias.begin(), r.grads.head.bias.end());
        g.insert(g.end(), r.grads.transition.values().begin(), r.grads.transition.values().end());
        grad->assign(g.begin() + static_cast<std::ptrdiff_t>(offset),
                     g.begin() + static_cast<std::ptrdiff_t>(offset + count));
      }
      return value;
    };
  };

  std::vector<GradCheckReport> out;
  out.push_back(finite_diff_gradcheck(make(0, nw), c.params.weights.values(), h, "head.weights"));
  out.push_back(finite_diff_gradcheck(make(nw, nb), c.params.bias, h, "head.bias"));
  out.push_back(finite_diff_gradcheck(make(nw + nb, nt), c.transition.logits.values(), h,
                                      "transition.logits"));
  return out;
}

GradCheckSuiteResult run_gradcheck_suite(std::uint64_t seed, std::size_t configurations, double h,
                                         double tolerance) {
  static constexpr std::size_t kClasses[] = {3, 5};
  static constexpr std::size_t kDims[] = {4, 8};
  GradCheckSuiteResult result;
  SplitMix64 root(seed);
  for (std::size_t i = 0; i < configurations; ++i) {
    SplitMix64 rng = root.fork(i);
    const std::size_t k = kClasses[i % 2];
    const std::size_t d = kDims[(i / 2) % 2];
    // Without the IM term this is the DCPL objective alone; with it, the
    // combined objective.
    for (const double im : {0.0, 1.0}) {
      const auto c = make_gradcheck_case(rng, k, d, 16, im);
      for (auto& r : gradcheck_total_loss(c, h)) {
        r.group = (im == 0.0 ? "dcpl/" : "combined/") + r.group + " k=" + std::to_string(k) +
                  " d_f=" + std::to_string(d) + " #" + std::to_string(i);
        result.max_rel_error = std::max(result.max_rel_error, r.max_rel_error);
        result.reports.push_back(std::move(r));
      }
    }
    ++result.configurations;
  }
  result.passed = result.max_rel_error < tolerance;
  return result;
}

BoundCheckResult eq5_bound_check(const Mat& t_hat, const Mat& p_bar, double tolerance) {
  const std::size_t k = t_hat.rows();
  if (t_hat.cols() != k || p_bar.rows() != k || p_bar.cols() != k)
    throw ArgumentError("eq5_bound_check: matrices must both be k x k");
  BoundCheckResult r;
  for (std::size_t i = 0; i < k && r.precondition_met; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (t_hat(i, j) > t_hat(i, i)) {
        r.precondition_met = false;
        r.precondition_failure = "t_hat row " + std::to_string(i) + " is not diagonally dominant";
        break;
      }
  for (std::size_t i = 0; i < k && r.precondition_met; ++i) {
    double col = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (p_bar(j, i) < 0.0 || p_bar(j, i) > 1.0) {
        r.precondition_met = false;
        r.precondition_failure = "p_bar entry outside [0, 1]";
      }
      col += p_bar(j, i);
    }
    if (std::abs(col - 1.0) > 1e-12) {
      r.precondition_met = false;
      r.precondition_failure = "p_bar column " + std::to_string(i) + " does not sum to 1";
    }
  }
  if (!r.precondition_met) {
    r.holds = false;
    return r;
  }
  r.induced_diagonal.assign(k, 0.0);
  r.max_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    double t = 0.0;
    for (std::size_t j = 0; j < k; ++j) t += t_hat(i, j) * p_bar(j, i);
    r.induced_diagonal[i] = t;
    const double excess = t - t_hat(i, i);
    if (excess > r.max_excess) r.max_excess = excess;
    if (excess > tolerance && !r.violating_index) {
      r.holds = false;
      r.violating_index = i;
    }
  }
  return r;
}

Mat random_row_dominant_transition(SplitMix64& rng, std::size_t k) {
  // Columns of uniform noise with a diagonal boost of k, normalised to sum
  // to 1: diagonal >= 1/2 while off-diagonals stay <= 1/k.
  Mat t(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      t(i, j) = rng.uniform() + (i == j ? static_cast<double>(k) : 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += t(i, j);
    for (std::size_t i = 0; i < k; ++i) t(i, j) /= s;
  }
  return t;
}

Mat random_column_stochastic(SplitMix64& rng, std::size_t k) {
  Mat p(k, k);
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      // Exponential draws give a uniform point on the simplex.
      p(i, j) = -std::log(1.0 - rng.uniform());
      s += p(i, j);
    }
    for (std::size_t i = 0; i < k; ++i) p(i, j) /= s;
    // Residual rounding goes to the largest entry.
    double sum = 0.0;
    std::size_t big = 0;
    for (std::size_t i = 0; i < k; ++i) {
      sum += p(i, j);
      if (p(i, j) > p(big, j)) big = i;
    }
    p(big, j) += 1.0 - sum;
  }
  return p;
}

BoundSuiteResult run_bound_suite(std::uint64_t seed, std::size_t trials,
                                 std::vector<std::size_t> ks, double tolerance) {
  BoundSuiteResult out;
  SplitMix64 root(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    SplitMix64 rng = root.fork(t);
    const std::size_t k = ks[t % ks.size()];
    const Mat t_hat = random_row_dominant_transition(rng, k);
    const Mat p_bar = random_column_stochastic(rng, k);
    const auto r = eq5_bound_check(t_hat, p_bar, tolerance);
    ++out.trials;
    if (!r.precondition_met) {
      ++out.precondition_failures;
      continue;
    }
    if (!r.holds) ++out.violations;
    out.max_excess = std::max(out.max_excess, r.max_excess);
  }
  out.passed = out.violations == 0 && out.precondition_failures == 0;
  return out;
}

double transition_recovery_error(const Mat& t_hat, const Mat& t_oracle) {
  return std::sqrt(frobenius_sq(t_hat, t_oracle));
}

}  // namespace dcpl
