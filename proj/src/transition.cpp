#include "dcpl/transition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dcpl/error.hpp"

namespace dcpl {

namespace {

const Mat& oriented(const PriorMatrix& prior, bool transpose, Mat& scratch) {
  if (!transpose) return prior.matrix;
  scratch = prior.matrix.transposed();
  return scratch;
}

}  // namespace

Mat materialize(const TransitionParams& tp) {
  const std::size_t k = tp.logits.rows();
  if (tp.logits.cols() != k) throw ArgumentError("materialize: transition logits must be square");
  if (!all_finite(tp.logits.values())) throw ArgumentError("materialize: non-finite logits");
  Mat t(k, k);
  for (std::size_t j = 0; j < k; ++j) {
    double mx = tp.logits(0, j);
    for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, tp.logits(i, j));
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      t(i, j) = std::exp(tp.logits(i, j) - mx);
      sum += t(i, j);
    }
    for (std::size_t i = 0; i < k; ++i) t(i, j) /= sum;
  }
  return t;
}

TransitionParams init_near_identity(std::size_t k, double beta) {
  if (k < 2) throw ArgumentError("init_near_identity: need k >= 2, got " + std::to_string(k));
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw ArgumentError("init_near_identity: beta must be finite and non-negative");
  TransitionParams tp{Mat(k, k)};
  for (std::size_t i = 0; i < k; ++i) tp.logits(i, i) = beta;
  return tp;
}

double trace_penalty(const Mat& t_hat) {
  double tr = 0.0;
  for (std::size_t i = 0; i < std::min(t_hat.rows(), t_hat.cols()); ++i) tr += t_hat(i, i);
  return tr;
}

double prior_penalty(const Mat& t_hat, const PriorMatrix& prior, bool transpose_prior) {
  Mat scratch;
  return frobenius_sq(t_hat, oriented(prior, transpose_prior, scratch));
}

Mat penalty_gradient(const Mat& t_hat, const PriorMatrix& prior, double lambda, double gamma,
                     bool transpose_prior) {
  Mat scratch;
  const Mat& p = oriented(prior, transpose_prior, scratch);
  if (p.rows() != t_hat.rows() || p.cols() != t_hat.cols())
    throw ArgumentError("penalty_gradient: prior shape does not match transition matrix");
  Mat g(t_hat.rows(), t_hat.cols());
  for (std::size_t i = 0; i < g.size(); ++i)
    g.values()[i] = 2.0 * gamma * (t_hat.values()[i] - p.values()[i]);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += lambda;
  return g;
}

Mat backprop_to_logits(const Mat& t_hat, const Mat& grad_t_hat) {
  const std::size_t k = t_hat.rows();
  if (t_hat.cols() != k || grad_t_hat.rows() != k || grad_t_hat.cols() != k)
    throw ArgumentError("backprop_to_logits: gradient shape does not match transition matrix");
  Mat out(k, k);
  for (std::size_t j = 0; j < k; ++j) {
    double inner = 0.0;
    for (std::size_t i = 0; i < k; ++i) inner += grad_t_hat(i, j) * t_hat(i, j);
    for (std::size_t m = 0; m < k; ++m) out(m, j) = t_hat(m, j) * (grad_t_hat(m, j) - inner);
  }
  return out;
}

}  // namespace dcpl
