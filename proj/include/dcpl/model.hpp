#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dcpl/mathcore.hpp"

namespace dcpl {

// Linear classification head: logits = features * weights^T + bias.
// The same layout serves the source head g_s and the adapted head g_t.
struct ModelParams {
  Mat weights;  // k x d_f
  Vec bias;     // k

  ModelParams() = default;
  ModelParams(std::size_t k, std::size_t d_f) : weights(k, d_f), bias(k, 0.0) {}

  std::size_t num_classes() const noexcept { return weights.rows(); }
  std::size_t feature_dim() const noexcept { return weights.cols(); }
  bool is_finite() const;

  bool operator==(const ModelParams&) const = default;
};

struct SgdConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-3;
};

// Velocity buffer for one flat parameter group.
struct SgdState {
  SgdConfig config;
  std::vector<double> velocity;

  SgdState() = default;
  SgdState(SgdConfig cfg, std::size_t size) : config(cfg), velocity(size, 0.0) {}
};

// Velocity for a head, shaped like the head.
struct OptimizerState {
  SgdConfig config;
  ModelParams velocity;

  OptimizerState() = default;
  OptimizerState(SgdConfig cfg, std::size_t k, std::size_t d_f)
      : config(cfg), velocity(k, d_f) {}
};

// g' = grad + weight_decay * param; v = momentum * v + g'; param -= lr * v.
void sgd_update(std::span<double> params, std::span<const double> grads,
                std::span<double> velocity, const SgdConfig& cfg);

void sgd_step(ModelParams& params, const ModelParams& grads, OptimizerState& state);

// Row-wise softmax(features * W^T + b). Throws ArgumentError on a dimension
// mismatch.
Mat forward_logits(const ModelParams& params, const Mat& features);
Mat forward_probs(const ModelParams& params, const Mat& features);

// Clean-posterior argmax per row; ties go to the lowest class index.
std::vector<std::size_t> predict_labels(const ModelParams& params, const Mat& features);

// Fraction of rows whose prediction matches labels.
double accuracy(const ModelParams& params, const Mat& features,
                std::span<const std::size_t> labels);

}  // namespace dcpl
