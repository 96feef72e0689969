#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dcpl/dataset.hpp"
#include "dcpl/losses.hpp"
#include "dcpl/model.hpp"
#include "dcpl/pseudolabel.hpp"
#include "dcpl/transition.hpp"

namespace dcpl {

enum class TransitionMode {
  kLearned,         // T initialised near identity and trained jointly
  kFrozenIdentity,  // T fixed at beta = 30 (numerically the identity)
  kFrozenOracle,    // T fixed at the empirical confusion of pseudo vs true labels
};

// Diagonal logit used for the frozen-identity baseline.
inline constexpr double kFrozenIdentityBeta = 30.0;

struct AdaptationReport {
  TransitionMode mode = TransitionMode::kLearned;
  std::vector<LossBreakdown> epoch_losses;
  std::vector<double> epoch_accuracy;  // clean accuracy after each epoch (needs true labels)
  std::optional<double> pseudo_label_accuracy;
  std::optional<double> source_accuracy;  // g_s on the target, before adaptation
  Labels pseudo_labels;
  Centroids centroids;
  PriorMatrix prior;
  Mat t_hat;  // final transition matrix (learned or frozen)
  std::optional<Mat> t_oracle;
  ModelParams head;
  std::vector<std::string> warnings;
  double seconds = 0.0;

  std::optional<double> final_accuracy() const {
    if (epoch_accuracy.empty()) return std::nullopt;
    return epoch_accuracy.back();
  }
};

// Pseudo-label once, build the prior, then run hp.epochs of joint SGD on the
// head and (in kLearned mode) the transition logits. Batch order depends on
// hp.seed only, so runs in different modes see identical batches.
AdaptationReport run_dcpl(const Dataset& ds, const ModelParams& source_head,
                          const HyperParams& hp, TransitionMode mode);

AdaptationReport run_adaptation(const Dataset& ds, const ModelParams& source_head,
                                const HyperParams& hp);
AdaptationReport run_identity_baseline(const Dataset& ds, const ModelParams& source_head,
                                       const HyperParams& hp);
AdaptationReport run_oracle(const Dataset& ds, const ModelParams& source_head,
                            const HyperParams& hp);

std::string to_string(TransitionMode mode);

}  // namespace dcpl
