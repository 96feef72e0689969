#include "dcpl/losses.hpp"

#include <cmath>
#include <string>

#include "dcpl/error.hpp"
#include "dcpl/parallel.hpp"

namespace dcpl {

namespace {

void check_batch(const ModelParams& params, const Mat& features,
                 std::span<const std::size_t> labels) {
  if (features.rows() == 0) throw ArgumentError("loss: empty batch");
  if (features.cols() != params.feature_dim())
    throw ArgumentError("loss: feature dimension " + std::to_string(features.cols()) +
                        " does not match head input " + std::to_string(params.feature_dim()));
  if (labels.size() != features.rows())
    throw ArgumentError("loss: label count does not match batch size");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= params.num_classes())
      throw ArgumentError("loss: pseudo-label at batch row " + std::to_string(i) +
                          " is out of range");
}

// dW = sum_i dz_i x_i^T, db = sum_i dz_i, in row order.
ModelParams head_gradient(const Mat& dlogits, const Mat& features) {
  const std::size_t k = dlogits.cols();
  ModelParams g(k, features.cols());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto dz = dlogits.row(i);
    const auto x = features.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      if (dz[c] == 0.0) continue;
      auto w = g.weights.row(c);
      for (std::size_t j = 0; j < x.size(); ++j) w[j] += dz[c] * x[j];
      g.bias[c] += dz[c];
    }
  }
  return g;
}

Mat batch_probs(const ModelParams& params, const Mat& features) {
  Mat probs = forward_logits(params, features);
  parallel_for(probs.rows(), [&](std::size_t i) { softmax_into(probs.row(i), probs.row(i)); });
  return probs;
}

void add_into(ModelParams& acc, const ModelParams& g, double scale) {
  for (std::size_t i = 0; i < acc.weights.size(); ++i)
    acc.weights.values()[i] += scale * g.weights.values()[i];
  for (std::size_t i = 0; i < acc.bias.size(); ++i) acc.bias[i] += scale * g.bias[i];
}

}  // namespace

void HyperParams::validate() const {
  auto need = [](bool ok, const char* name, const std::string& rule) {
    if (!ok) throw ArgumentError(std::string("hyperparameter '") + name + "' must be " + rule);
  };
  need(lambda >= 0.0 && std::isfinite(lambda), "lambda", ">= 0");
  need(gamma >= 0.0 && std::isfinite(gamma), "gamma", ">= 0");
  need(tau > 0.0 && std::isfinite(tau), "tau", "> 0");
  need(learning_rate >= 0.0 && std::isfinite(learning_rate), "lr", ">= 0");
  need(momentum >= 0.0 && momentum < 1.0, "momentum", "in [0, 1)");
  need(weight_decay >= 0.0 && std::isfinite(weight_decay), "weight_decay", ">= 0");
  need(batch_size >= 1, "batch_size", ">= 1");
  need(im_weight >= 0.0 && std::isfinite(im_weight), "im_weight", ">= 0");
  need(beta >= 0.0 && std::isfinite(beta), "beta", ">= 0");
}

LossResult dcpl_batch_loss_matrix(const ModelParams& params, const Mat& t_hat,
                                  const PriorMatrix& prior, const Mat& features,
                                  std::span<const std::size_t> pseudo_labels,
                                  const HyperParams& hp) {
  check_batch(params, features, pseudo_labels);
  const std::size_t k = params.num_classes();
  if (t_hat.rows() != k || t_hat.cols() != k)
    throw ArgumentError("loss: transition matrix is not k x k");
  const std::size_t b = features.rows();
  const double inv_b = 1.0 / static_cast<double>(b);

  const Mat probs = batch_probs(params, features);
  Mat dlogits(b, k);
  Vec ce(b);
  Vec inv_q(b);
  parallel_for(b, [&](std::size_t i) {
    const auto p = probs.row(i);
    const std::size_t y = pseudo_labels[i];
    double q = 0.0;
    for (std::size_t j = 0; j < k; ++j) q += t_hat(y, j) * p[j];
    const double denom = q + kLogFloor;
    ce[i] = -std::log(denom);
    inv_q[i] = 1.0 / denom;
    // dCE/dp_j = -t_yj / denom, then through the softmax Jacobian.
    double inner = 0.0;
    for (std::size_t j = 0; j < k; ++j) inner += -t_hat(y, j) * inv_q[i] * p[j];
    auto dz = dlogits.row(i);
    for (std::size_t j = 0; j < k; ++j) dz[j] = p[j] * (-t_hat(y, j) * inv_q[i] - inner) * inv_b;
  });

  LossResult out;
  for (std::size_t i = 0; i < b; ++i) out.breakdown.ce_noisy += ce[i];
  out.breakdown.ce_noisy *= inv_b;
  out.breakdown.trace_term = trace_penalty(t_hat);
  out.breakdown.prior_term = prior_penalty(t_hat, prior, hp.prior_transpose);
  out.breakdown.total = out.breakdown.ce_noisy + hp.lambda * out.breakdown.trace_term +
                        hp.gamma * out.breakdown.prior_term;

  out.grads.head = head_gradient(dlogits, features);
  Mat gt = penalty_gradient(t_hat, prior, hp.lambda, hp.gamma, hp.prior_transpose);
  for (std::size_t i = 0; i < b; ++i) {
    const auto p = probs.row(i);
    const std::size_t y = pseudo_labels[i];
    for (std::size_t j = 0; j < k; ++j) gt(y, j) -= p[j] * inv_q[i] * inv_b;
  }
  out.grads.transition = std::move(gt);
  return out;
}

LossResult dcpl_batch_loss(const ModelParams& params, const TransitionParams& tp,
                           const PriorMatrix& prior, const Mat& features,
                           std::span<const std::size_t> pseudo_labels, const HyperParams& hp) {
  const Mat t_hat = materialize(tp);
  LossResult r = dcpl_batch_loss_matrix(params, t_hat, prior, features, pseudo_labels, hp);
  r.grads.transition = backprop_to_logits(t_hat, r.grads.transition);
  return r;
}

ScalarLoss im_loss(const ModelParams& params, const Mat& features) {
  if (features.rows() == 0) throw ArgumentError("im_loss: empty batch");
  if (features.cols() != params.feature_dim())
    throw ArgumentError("im_loss: feature dimension does not match head input");
  const std::size_t k = params.num_classes();
  const std::size_t b = features.rows();
  const double inv_b = 1.0 / static_cast<double>(b);
  const Mat probs = batch_probs(params, features);

  Vec mean(k, 0.0);
  double cond = 0.0;
  Vec plogp(b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const auto p = probs.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      mean[j] += p[j];
      if (p[j] > 0.0) plogp[i] += p[j] * std::log(p[j]);
    }
    cond -= plogp[i];
  }
  for (double& m : mean) m *= inv_b;
  cond *= inv_b;

  ScalarLoss out;
  out.value = cond - entropy(mean);

  // Per-sample entropy: dH/dz_c = -p_c (ln p_c - sum p ln p).
  // Marginal term -H(mean): upstream g_c = ln(mean_c) / b (the +1 cancels in
  // the softmax Jacobian).
  Vec log_mean(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) log_mean[j] = mean[j] > 0.0 ? std::log(mean[j]) : 0.0;
  Mat dlogits(b, k);
  for (std::size_t i = 0; i < b; ++i) {
    const auto p = probs.row(i);
    double inner = 0.0;
    for (std::size_t j = 0; j < k; ++j) inner += p[j] * log_mean[j];
    auto dz = dlogits.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      if (p[j] == 0.0) continue;
      const double cond_grad = -p[j] * (std::log(p[j]) - plogp[i]);
      const double marg_grad = p[j] * (log_mean[j] - inner);
      dz[j] = (cond_grad + marg_grad) * inv_b;
    }
  }
  out.grads = head_gradient(dlogits, features);
  return out;
}

LossResult total_loss_matrix(const ModelParams& params, const Mat& t_hat, const PriorMatrix& prior,
                             const Mat& features, std::span<const std::size_t> pseudo_labels,
                             const HyperParams& hp) {
  LossResult r = dcpl_batch_loss_matrix(params, t_hat, prior, features, pseudo_labels, hp);
  if (hp.im_weight != 0.0) {
    const ScalarLoss im = im_loss(params, features);
    r.breakdown.sfda_term = im.value;
    r.breakdown.total += hp.im_weight * im.value;
    add_into(r.grads.head, im.grads, hp.im_weight);
  }
  return r;
}

LossResult total_loss(const ModelParams& params, const TransitionParams& tp,
                      const PriorMatrix& prior, const Mat& features,
                      std::span<const std::size_t> pseudo_labels, const HyperParams& hp) {
  const Mat t_hat = materialize(tp);
  LossResult r = total_loss_matrix(params, t_hat, prior, features, pseudo_labels, hp);
  r.grads.transition = backprop_to_logits(t_hat, r.grads.transition);
  return r;
}

double plain_cross_entropy(const ModelParams& params, const Mat& features,
                           std::span<const std::size_t> labels) {
  check_batch(params, features, labels);
  const Mat probs = forward_probs(params, features);
  double ce = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) ce += cross_entropy_onehot(probs.row(i), labels[i]);
  return ce / static_cast<double>(labels.size());
}

}  // namespace dcpl
