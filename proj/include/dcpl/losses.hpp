#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "dcpl/mathcore.hpp"
#include "dcpl/model.hpp"
#include "dcpl/pseudolabel.hpp"
#include "dcpl/transition.hpp"

namespace dcpl {

enum class LrSchedule {
  kConstant,
  kPoly,  // lr * (1 + 10 p)^-0.75, p = progress in [0, 1]
};

struct HyperParams {
  double lambda = 0.01;        // trace weight
  double gamma = 0.01;         // prior weight
  double tau = 0.01;           // prior temperature
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  std::uint64_t seed = 2020;
  double im_weight = 0.0;      // weight of the information-maximization term
  double beta = 6.0;           // diagonal logit of the near-identity init
  LrSchedule lr_schedule = LrSchedule::kConstant;
  bool prior_transpose = false;

  // Throws ArgumentError naming the first out-of-range field.
  void validate() const;
  SgdConfig sgd() const { return {learning_rate, momentum, weight_decay}; }

  bool operator==(const HyperParams&) const = default;
};

struct LossBreakdown {
  double ce_noisy = 0.0;
  double trace_term = 0.0;
  double prior_term = 0.0;
  double sfda_term = 0.0;
  double total = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

struct LossGradients {
  ModelParams head;
  Mat transition;  // w.r.t. the transition logits (or the matrix itself for *_matrix variants)
};

struct LossResult {
  LossBreakdown breakdown;
  LossGradients grads;
};

struct ScalarLoss {
  double value = 0.0;
  ModelParams grads;
};

// Mean of -ln([T p(y|x)]_noisy + 1e-12) over the batch, plus
// lambda tr(T) + gamma ||T - prior||_F^2. Gradients are exact.
LossResult dcpl_batch_loss(const ModelParams& params, const TransitionParams& tp,
                           const PriorMatrix& prior, const Mat& features,
                           std::span<const std::size_t> pseudo_labels, const HyperParams& hp);

// Same objective against an explicit column-stochastic matrix. grads.transition
// is the gradient w.r.t. the matrix entries.
LossResult dcpl_batch_loss_matrix(const ModelParams& params, const Mat& t_hat,
                                  const PriorMatrix& prior, const Mat& features,
                                  std::span<const std::size_t> pseudo_labels,
                                  const HyperParams& hp);

// mean_x H(p(y|x)) - H(mean_x p(y|x)) with its head gradient.
ScalarLoss im_loss(const ModelParams& params, const Mat& features);

// dcpl_batch_loss + im_weight * im_loss; gradients summed.
LossResult total_loss(const ModelParams& params, const TransitionParams& tp,
                      const PriorMatrix& prior, const Mat& features,
                      std::span<const std::size_t> pseudo_labels, const HyperParams& hp);

LossResult total_loss_matrix(const ModelParams& params, const Mat& t_hat, const PriorMatrix& prior,
                             const Mat& features, std::span<const std::size_t> pseudo_labels,
                             const HyperParams& hp);

// Plain pseudo-label cross-entropy (no transition layer), batch mean.
double plain_cross_entropy(const ModelParams& params, const Mat& features,
                           std::span<const std::size_t> labels);

}  // namespace dcpl
