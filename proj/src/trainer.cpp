#include "dcpl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "dcpl/error.hpp"
#include "dcpl/rng.hpp"
#include "dcpl/synthbench.hpp"

namespace dcpl {

namespace {

std::uint64_t checksum(const Labels& labels, const Mat& prior) {
  std::uint64_t h = fnv1a(labels.data(), labels.size() * sizeof(Labels::value_type));
  return fnv1a(prior.values().data(), prior.size() * sizeof(double), h);
}

double learning_rate_at(const HyperParams& hp, std::size_t iter, std::size_t max_iter) {
  if (hp.lr_schedule == LrSchedule::kConstant || max_iter == 0) return hp.learning_rate;
  const double progress = static_cast<double>(iter) / static_cast<double>(max_iter);
  return hp.learning_rate * std::pow(1.0 + 10.0 * progress, -0.75);
}

bool breakdown_finite(const LossBreakdown& b) {
  return std::isfinite(b.ce_noisy) && std::isfinite(b.trace_term) &&
         std::isfinite(b.prior_term) && std::isfinite(b.sfda_term) && std::isfinite(b.total);
}

double label_accuracy(const Labels& predicted, const Labels& truth) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace

std::string to_string(TransitionMode mode) {
  switch (mode) {
    case TransitionMode::kLearned: return "learned";
    case TransitionMode::kFrozenIdentity: return "frozen-identity";
    case TransitionMode::kFrozenOracle: return "frozen-oracle";
  }
  return "unknown";
}

AdaptationReport run_dcpl(const Dataset& ds, const ModelParams& source_head,
                          const HyperParams& hp, TransitionMode mode) {
  const auto start = std::chrono::steady_clock::now();
  validate(ds);
  hp.validate();
  if (source_head.num_classes() != ds.k || source_head.feature_dim() != ds.d_f())
    throw ArgumentError("run_adaptation: source head is " +
                        std::to_string(source_head.num_classes()) + "x" +
                        std::to_string(source_head.feature_dim()) + ", dataset needs " +
                        std::to_string(ds.k) + "x" + std::to_string(ds.d_f()));
  if (ds.k < 2) throw ArgumentError("run_adaptation: need at least two classes");
  if (mode == TransitionMode::kFrozenOracle && !ds.true_labels)
    throw ArgumentError("oracle adaptation needs true labels on the target dataset");

  AdaptationReport report;
  report.mode = mode;
  report.head = source_head;
  if (ds.true_labels) report.source_accuracy = accuracy(source_head, ds.features_f, *ds.true_labels);

  // Pseudo-labels and prior are computed once and frozen for the whole run.
  report.centroids = compute_centroids(ds, source_head);
  report.pseudo_labels = assign_pseudo_labels(ds, report.centroids);
  report.prior = compute_prior_matrix(ds.features_p, report.pseudo_labels, report.centroids, hp.tau);
  report.warnings = report.prior.warnings;
  if (ds.true_labels) {
    report.pseudo_label_accuracy = label_accuracy(report.pseudo_labels, *ds.true_labels);
    Dataset labelled;
    labelled.k = ds.k;
    labelled.true_labels = ds.true_labels;
    labelled.pseudo_labels = report.pseudo_labels;
    auto oracle = oracle_transition(labelled);
    report.t_oracle = std::move(oracle.matrix);
    for (auto& w : oracle.warnings) report.warnings.push_back(std::move(w));
  }

  TransitionParams tp;
  Mat t_frozen;
  switch (mode) {
    case TransitionMode::kLearned:
      tp = init_near_identity(ds.k, hp.beta);
      break;
    case TransitionMode::kFrozenIdentity:
      t_frozen = materialize(init_near_identity(ds.k, kFrozenIdentityBeta));
      break;
    case TransitionMode::kFrozenOracle:
      t_frozen = *report.t_oracle;
      break;
  }
  const bool learn_t = mode == TransitionMode::kLearned;

  const std::uint64_t frozen_sum = checksum(report.pseudo_labels, report.prior.matrix);
  OptimizerState head_opt(hp.sgd(), ds.k, ds.d_f());
  SgdState t_opt(hp.sgd(), ds.k * ds.k);

  const std::size_t n = ds.n();
  const std::size_t batches_per_epoch = (n + hp.batch_size - 1) / hp.batch_size;
  const std::size_t max_iter = batches_per_epoch * hp.epochs;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(hp.seed);

  Mat xb;
  Labels yb;
  std::size_t iter = 0;
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    LossBreakdown epoch_loss;
    for (std::size_t b = 0; b < batches_per_epoch; ++b, ++iter) {
      const std::size_t lo = b * hp.batch_size;
      const std::size_t hi = std::min(n, lo + hp.batch_size);
      xb = Mat(hi - lo, ds.d_f());
      yb.resize(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) {
        const auto src = ds.features_f.row(order[i]);
        std::copy(src.begin(), src.end(), xb.row(i - lo).begin());
        yb[i - lo] = report.pseudo_labels[order[i]];
      }

      const Mat t_hat = learn_t ? materialize(tp) : t_frozen;
      LossResult r = total_loss_matrix(report.head, t_hat, report.prior, xb, yb, hp);
      if (!breakdown_finite(r.breakdown))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b));

      const double w = static_cast<double>(hi - lo) / static_cast<double>(n);
      epoch_loss.ce_noisy += w * r.breakdown.ce_noisy;
      epoch_loss.trace_term += w * r.breakdown.trace_term;
      epoch_loss.prior_term += w * r.breakdown.prior_term;
      epoch_loss.sfda_term += w * r.breakdown.sfda_term;
      epoch_loss.total += w * r.breakdown.total;

      const double lr = learning_rate_at(hp, iter, max_iter);
      head_opt.config.learning_rate = lr;
      sgd_step(report.head, r.grads.head, head_opt);
      if (learn_t) {
        const Mat g_logits = backprop_to_logits(t_hat, r.grads.transition);
        t_opt.config.learning_rate = lr;
        sgd_update(tp.logits.values(), g_logits.values(), t_opt.velocity, t_opt.config);
      }
      if (!report.head.is_finite() || !all_finite(tp.logits.values()))
        throw NumericError("parameters became non-finite at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b));
    }
    if (checksum(report.pseudo_labels, report.prior.matrix) != frozen_sum)
      throw ContractError("pseudo-labels or prior changed during epoch " + std::to_string(epoch));
    report.epoch_losses.push_back(epoch_loss);
    if (ds.true_labels)
      report.epoch_accuracy.push_back(accuracy(report.head, ds.features_f, *ds.true_labels));
  }

  report.t_hat = learn_t ? materialize(tp) : t_frozen;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

AdaptationReport run_adaptation(const Dataset& ds, const ModelParams& source_head,
                                const HyperParams& hp) {
  return run_dcpl(ds, source_head, hp, TransitionMode::kLearned);
}

AdaptationReport run_identity_baseline(const Dataset& ds, const ModelParams& source_head,
                                       const HyperParams& hp) {
  return run_dcpl(ds, source_head, hp, TransitionMode::kFrozenIdentity);
}

AdaptationReport run_oracle(const Dataset& ds, const ModelParams& source_head,
                            const HyperParams& hp) {
  return run_dcpl(ds, source_head, hp, TransitionMode::kFrozenOracle);
}

}  // namespace dcpl
