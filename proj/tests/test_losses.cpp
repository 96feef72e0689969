#include <doctest.h>

#include <cmath>

#include "dcpl/error.hpp"
#include "dcpl/losses.hpp"
#include "dcpl/verify.hpp"
#include "test_support.hpp"

using namespace dcpl;

namespace {

// A head with zero weights whose bias fixes the class probabilities.
ModelParams constant_head(const Vec& probs, std::size_t d_f) {
  ModelParams p(probs.size(), d_f);
  for (std::size_t c = 0; c < probs.size(); ++c) p.bias[c] = std::log(probs[c]);
  return p;
}

PriorMatrix identity_prior(std::size_t k) {
  PriorMatrix p;
  p.matrix = Mat::identity(k);
  return p;
}

struct Batch {
  ModelParams params;
  TransitionParams transition;
  PriorMatrix prior;
  Mat features;
  Labels labels;
};

Batch random_batch(SplitMix64& rng, std::size_t k, std::size_t d, std::size_t b) {
  Batch out;
  out.params = ModelParams(k, d);
  for (double& w : out.params.weights.values()) w = rng.normal();
  for (double& v : out.params.bias) v = 0.3 * rng.normal();
  out.transition.logits = Mat(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) out.transition.logits(i, j) = (i == j ? 3.0 : 0.0) + rng.normal();
  out.prior.matrix = materialize({Mat(k, k, 0.0)});
  out.features = Mat(b, d);
  for (double& x : out.features.values()) x = rng.normal();
  out.labels.resize(b);
  for (auto& y : out.labels) y = rng.below(k);
  return out;
}

}  // namespace

TEST_CASE("noisy cross-entropy hand value") {
  const ModelParams p = constant_head({0.8, 0.2}, 1);
  const Mat t(2, 2, {0.9, 0.1, 0.1, 0.9});
  HyperParams hp;
  hp.lambda = 0.0;
  hp.gamma = 0.0;
  const LossResult r = dcpl_batch_loss_matrix(p, t, identity_prior(2), Mat(1, 1), Labels{0}, hp);
  CHECK(r.breakdown.ce_noisy == doctest::Approx(-std::log(0.74 + kLogFloor)).epsilon(1e-13));
  CHECK(r.breakdown.ce_noisy == doctest::Approx(0.301105).epsilon(1e-6));

  // The same matrix through logits: ln 9 on the diagonal gives 0.9 / 0.1 columns.
  TransitionParams tp{Mat(2, 2, {std::log(9.0), 0.0, 0.0, std::log(9.0)})};
  const LossResult viaLogits = dcpl_batch_loss(p, tp, identity_prior(2), Mat(1, 1), Labels{0}, hp);
  CHECK(viaLogits.breakdown.ce_noisy == doctest::Approx(r.breakdown.ce_noisy).epsilon(1e-14));
}

TEST_CASE("frozen near-identity transition reduces to plain cross-entropy") {
  SplitMix64 rng(1);
  HyperParams hp;
  hp.lambda = 0.0;
  hp.gamma = 0.0;
  hp.im_weight = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    // Unit-scale logits: 1e-9 holds whenever no label probability drops below about 1e-4.
    const std::size_t k = 2 + rng.below(6);
    const std::size_t d = 1 + rng.below(8);
    Batch b = random_batch(rng, k, d, 1 + rng.below(32));
    for (double& w : b.params.weights.values()) w /= std::sqrt(static_cast<double>(d));
    b.transition = init_near_identity(k, 30.0);
    const LossResult r = total_loss(b.params, b.transition, identity_prior(k), b.features, b.labels, hp);
    CHECK(std::abs(r.breakdown.ce_noisy - plain_cross_entropy(b.params, b.features, b.labels)) < 1e-9);
  }
}

TEST_CASE("frozen near-identity gap follows its analytic bound for sharp heads") {
  SplitMix64 rng(11);
  HyperParams hp;
  hp.lambda = 0.0;
  hp.gamma = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(6);
    Batch b = random_batch(rng, k, 1 + rng.below(8), 1 + rng.below(32));
    for (double& w : b.params.weights.values()) w *= 4.0;
    b.transition = init_near_identity(k, 30.0);
    const LossResult r = total_loss(b.params, b.transition, identity_prior(k), b.features, b.labels, hp);
    const double gap = std::abs(r.breakdown.ce_noisy - plain_cross_entropy(b.params, b.features, b.labels));
    CHECK(gap <= testing::frozen_identity_gap_bound(b.params, b.features, b.labels));
  }
}

TEST_CASE("information maximization hand values") {
  // Uniform predictions: ln K - ln K.
  const ModelParams uniform(4, 2);
  CHECK(std::abs(im_loss(uniform, Mat(3, 2)).value) < 1e-15);

  // Confident predictions spread evenly over classes: 0 - ln K.
  ModelParams sharp(3, 3);
  sharp.weights = Mat(3, 3, {60, 0, 0, 0, 60, 0, 0, 0, 60});
  const Mat eye = Mat::identity(3);
  CHECK(im_loss(sharp, eye).value == doctest::Approx(-std::log(3.0)).epsilon(1e-12));

  // Probabilities [1, 0] and [0.5, 0.5]: (0 + ln 2) / 2 - H([0.75, 0.25]).
  ModelParams two(2, 1);
  two.weights = Mat(2, 1, {400.0, 0.0});
  const Mat x(2, 1, {1.0, 0.0});
  const double expected = std::log(2.0) / 2.0 + 0.75 * std::log(0.75) + 0.25 * std::log(0.25);
  CHECK(expected == doctest::Approx(-0.21576).epsilon(1e-4));
  CHECK(im_loss(two, x).value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("im_loss gradient matches finite differences") {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Batch b = random_batch(rng, 3 + rng.below(3), 4, 16);
    const std::size_t k = b.params.num_classes();
    auto f = [&](std::span<const double> w, std::vector<double>* grad) {
      ModelParams p = b.params;
      std::copy(w.begin(), w.end(), p.weights.values().begin());
      const ScalarLoss s = im_loss(p, b.features);
      if (grad) *grad = s.grads.weights.values();
      return s.value;
    };
    const GradCheckReport r = finite_diff_gradcheck(f, b.params.weights.values(), 1e-5, "im");
    CHECK(r.max_rel_error < 1e-6);
    CHECK(k >= 3);
  }
}

TEST_CASE("im_weight = 0 gives exactly the DCPL objective") {
  SplitMix64 rng(3);
  const Batch b = random_batch(rng, 4, 5, 20);
  HyperParams hp;
  hp.im_weight = 0.0;
  const LossResult a = total_loss(b.params, b.transition, b.prior, b.features, b.labels, hp);
  const LossResult d = dcpl_batch_loss(b.params, b.transition, b.prior, b.features, b.labels, hp);
  CHECK(a.breakdown == d.breakdown);
  CHECK(a.grads.head == d.grads.head);
  CHECK(a.grads.transition == d.grads.transition);
}

TEST_CASE("property: breakdown recombines and terms stay in range") {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + rng.below(6);
    const Batch b = random_batch(rng, k, 1 + rng.below(6), 1 + rng.below(40));
    HyperParams hp;
    hp.lambda = rng.uniform(0.0, 1.0);
    hp.gamma = rng.uniform(0.0, 1.0);
    hp.im_weight = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 2.0);
    hp.prior_transpose = rng.uniform() < 0.5;
    const LossBreakdown l =
        total_loss(b.params, b.transition, b.prior, b.features, b.labels, hp).breakdown;
    const double recombined =
        l.ce_noisy + hp.lambda * l.trace_term + hp.gamma * l.prior_term + hp.im_weight * l.sfda_term;
    CHECK(std::abs(l.total - recombined) < 1e-12);
    CHECK(l.ce_noisy >= 0.0);
    CHECK(l.trace_term > 0.0);
    CHECK(l.trace_term <= static_cast<double>(k));
    CHECK(l.prior_term >= 0.0);
  }
}

TEST_CASE("property: a small SGD step never increases the loss") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Batch b = random_batch(rng, 2 + rng.below(4), 2 + rng.below(5), 16);
    HyperParams hp;
    hp.lambda = rng.uniform(0.0, 0.5);
    hp.gamma = rng.uniform(0.0, 0.5);
    hp.im_weight = trial % 2 == 0 ? 0.0 : 1.0;
    const LossResult before = total_loss(b.params, b.transition, b.prior, b.features, b.labels, hp);
    const double eta = 1e-4;
    ModelParams p = b.params;
    for (std::size_t i = 0; i < p.weights.size(); ++i)
      p.weights.values()[i] -= eta * before.grads.head.weights.values()[i];
    for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= eta * before.grads.head.bias[i];
    TransitionParams t = b.transition;
    for (std::size_t i = 0; i < t.logits.size(); ++i)
      t.logits.values()[i] -= eta * before.grads.transition.values()[i];
    const LossResult after = total_loss(p, t, b.prior, b.features, b.labels, hp);
    CHECK(after.breakdown.total <= before.breakdown.total + 1e-10);
  }
}

TEST_CASE("gradients of the full objective pass the finite-difference oracle") {
  SplitMix64 rng(6);
  for (std::size_t k : {3u, 5u}) {
    for (double im : {0.0, 1.0}) {
      const GradCheckCase c = make_gradcheck_case(rng, k, 4, 16, im);
      for (const auto& r : gradcheck_total_loss(c)) {
        INFO(r.group);
        CHECK(r.max_rel_error < 1e-6);
      }
    }
  }
}

TEST_CASE("loss argument errors") {
  SplitMix64 rng(7);
  const Batch b = random_batch(rng, 3, 2, 4);
  HyperParams hp;
  CHECK_THROWS_AS(total_loss(b.params, b.transition, b.prior, Mat(0, 2), Labels{}, hp), ArgumentError);
  CHECK_THROWS_AS(total_loss(b.params, b.transition, b.prior, Mat(4, 3), b.labels, hp), ArgumentError);
  CHECK_THROWS_AS(total_loss(b.params, b.transition, b.prior, b.features, Labels{0, 1, 2, 3}, hp),
                  ArgumentError);
  CHECK_THROWS_AS(total_loss(b.params, b.transition, b.prior, b.features, Labels{0, 1}, hp),
                  ArgumentError);
  CHECK_THROWS_AS(im_loss(b.params, Mat(0, 2)), ArgumentError);
  TransitionParams wrong{Mat(2, 2)};
  CHECK_THROWS_AS(total_loss(b.params, wrong, b.prior, b.features, b.labels, hp), ArgumentError);
}

TEST_CASE("hyperparameter validation names the offending field") {
  HyperParams hp;
  hp.validate();
  hp.lambda = -1.0;
  try {
    hp.validate();
    FAIL("expected ArgumentError");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("lambda") != std::string::npos);
  }
  HyperParams small_batch;
  small_batch.batch_size = 0;
  CHECK_THROWS_AS(small_batch.validate(), ArgumentError);
  HyperParams tau;
  tau.tau = 0.0;
  CHECK_THROWS_AS(tau.validate(), ArgumentError);
}
