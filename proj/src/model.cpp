#include "dcpl/model.hpp"

#include <string>

#include "dcpl/error.hpp"

namespace dcpl {

bool ModelParams::is_finite() const {
  return all_finite(weights.values()) && all_finite(bias);
}

void sgd_update(std::span<double> params, std::span<const double> grads,
                std::span<double> velocity, const SgdConfig& cfg) {
  if (params.size() != grads.size() || params.size() != velocity.size())
    throw ArgumentError("sgd_update: parameter/gradient/velocity size mismatch (" +
                        std::to_string(params.size()) + ", " + std::to_string(grads.size()) +
                        ", " + std::to_string(velocity.size()) + ")");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + cfg.weight_decay * params[i];
    velocity[i] = cfg.momentum * velocity[i] + g;
    params[i] -= cfg.learning_rate * velocity[i];
  }
}

void sgd_step(ModelParams& params, const ModelParams& grads, OptimizerState& state) {
  if (grads.weights.rows() != params.weights.rows() ||
      grads.weights.cols() != params.weights.cols() || grads.bias.size() != params.bias.size())
    throw ArgumentError("sgd_step: gradient shape does not match parameters");
  if (state.velocity.weights.size() != params.weights.size() ||
      state.velocity.bias.size() != params.bias.size())
    throw ArgumentError("sgd_step: optimizer state shape does not match parameters");
  sgd_update(params.weights.values(), grads.weights.values(), state.velocity.weights.values(),
             state.config);
  sgd_update(params.bias, grads.bias, state.velocity.bias, state.config);
}

Mat forward_logits(const ModelParams& params, const Mat& features) {
  const std::size_t k = params.num_classes();
  const std::size_t d = params.feature_dim();
  if (features.cols() != d)
    throw ArgumentError("forward: feature dimension " + std::to_string(features.cols()) +
                        " does not match head input " + std::to_string(d));
  if (params.bias.size() != k) throw ArgumentError("forward: bias length does not match k");
  Mat logits(features.rows(), k);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto x = features.row(r);
    auto z = logits.row(r);
    for (std::size_t c = 0; c < k; ++c) z[c] = dot(params.weights.row(c), x) + params.bias[c];
  }
  return logits;
}

Mat forward_probs(const ModelParams& params, const Mat& features) {
  Mat probs = forward_logits(params, features);
  for (std::size_t r = 0; r < probs.rows(); ++r) softmax_into(probs.row(r), probs.row(r));
  return probs;
}

std::vector<std::size_t> predict_labels(const ModelParams& params, const Mat& features) {
  // Argmax on logits equals argmax on probabilities; skipping the softmax
  // keeps exact ties that rounding in exp() might otherwise break.
  const Mat logits = forward_logits(params, features);
  std::vector<std::size_t> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) out[r] = argmax(logits.row(r));
  return out;
}

double accuracy(const ModelParams& params, const Mat& features,
                std::span<const std::size_t> labels) {
  if (labels.size() != features.rows())
    throw ArgumentError("accuracy: label count does not match feature rows");
  if (labels.empty()) return 0.0;
  const auto pred = predict_labels(params, features);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace dcpl
