#pragma once

#include <cstddef>

#include "dcpl/mathcore.hpp"
#include "dcpl/pseudolabel.hpp"

namespace dcpl {

// Unconstrained k x k logits. Column j holds the logits of p(noisy = . | clean = j).
struct TransitionParams {
  Mat logits;

  std::size_t num_classes() const noexcept { return logits.rows(); }
  bool operator==(const TransitionParams&) const = default;
};

// Column-wise softmax of the logits: a column-stochastic matrix with
// t_ij = p(noisy = i | clean = j), all entries strictly positive.
Mat materialize(const TransitionParams& tp);

// beta on the diagonal, 0 elsewhere; materialized diagonal e^b / (e^b + k - 1).
TransitionParams init_near_identity(std::size_t k, double beta);

double trace_penalty(const Mat& t_hat);

// ||T - P||_F^2, or ||T - P^T||_F^2 when transpose_prior is set.
double prior_penalty(const Mat& t_hat, const PriorMatrix& prior, bool transpose_prior = false);

// d/dT of lambda * tr(T) + gamma * ||T - P||_F^2.
Mat penalty_gradient(const Mat& t_hat, const PriorMatrix& prior, double lambda, double gamma,
                     bool transpose_prior = false);

// Pulls a gradient w.r.t. the materialized matrix back to the logits through
// the per-column softmax Jacobian: dL/dz_mj = t_mj (g_mj - sum_i g_ij t_ij).
Mat backprop_to_logits(const Mat& t_hat, const Mat& grad_t_hat);

}  // namespace dcpl
