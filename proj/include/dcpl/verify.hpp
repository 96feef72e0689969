#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcpl/losses.hpp"
#include "dcpl/mathcore.hpp"
#include "dcpl/rng.hpp"

namespace dcpl {

// Evaluates a scalar loss at x. When grad is non-null it also receives the
// analytic gradient (same length as x).
using LossEvaluator = std::function<double(std::span<const double> x, std::vector<double>* grad)>;

struct GradCheckReport {
  std::string group;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double h = 1e-5;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// Central differences per coordinate, relative error with denominator
// max(|analytic|, |numeric|, 1e-10). h must lie in [1e-7, 1e-3]. Throws
// ContractError when two evaluations at the same point disagree.
GradCheckReport finite_diff_gradcheck(const LossEvaluator& f, std::span<const double> point,
                                      double h = 1e-5, std::string group = "params");

// One random loss instance for gradient checks.
struct GradCheckCase {
  ModelParams params;
  TransitionParams transition;
  PriorMatrix prior;
  Mat features;
  Labels labels;
  HyperParams hp;
};

GradCheckCase make_gradcheck_case(SplitMix64& rng, std::size_t k, std::size_t d_f,
                                  std::size_t batch, double im_weight);

// Checks weights, bias and transition logits of total_loss at the case.
std::vector<GradCheckReport> gradcheck_total_loss(const GradCheckCase& c, double h = 1e-5);

struct GradCheckSuiteResult {
  std::vector<GradCheckReport> reports;
  double max_rel_error = 0.0;
  std::size_t configurations = 0;
  bool passed = false;
};

// configurations random cases cycling k in {3,5} and d_f in {4,8}, batch 16,
// each checked with and without the information-maximization term.
GradCheckSuiteResult run_gradcheck_suite(std::uint64_t seed, std::size_t configurations = 20,
                                         double h = 1e-5, double tolerance = 1e-6);

struct BoundCheckResult {
  bool precondition_met = true;
  std::string precondition_failure;
  bool holds = true;
  Vec induced_diagonal;  // t_ii = sum_j that_ij pbar_ji
  std::optional<std::size_t> violating_index;
  double max_excess = 0.0;  // max_i (t_ii - that_ii)
};

// Numerical check of the trace bound t_ii <= that_ii for a row-dominant
// that (that_ii >= that_ij for all j) and column-stochastic pbar.
BoundCheckResult eq5_bound_check(const Mat& t_hat, const Mat& p_bar, double tolerance = 1e-12);

Mat random_row_dominant_transition(SplitMix64& rng, std::size_t k);
Mat random_column_stochastic(SplitMix64& rng, std::size_t k);

struct BoundSuiteResult {
  std::size_t trials = 0;
  std::size_t violations = 0;
  std::size_t precondition_failures = 0;
  double max_excess = -1.0;
  bool passed = false;
};

BoundSuiteResult run_bound_suite(std::uint64_t seed, std::size_t trials = 1000,
                                 std::vector<std::size_t> ks = {3, 5, 10},
                                 double tolerance = 1e-12);

// ||t_hat - t_oracle||_F.
double transition_recovery_error(const Mat& t_hat, const Mat& t_oracle);

}  // namespace dcpl
