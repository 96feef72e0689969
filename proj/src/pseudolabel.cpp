#include "dcpl/pseudolabel.hpp"

#include <cmath>

#include "dcpl/error.hpp"
#include "dcpl/parallel.hpp"

namespace dcpl {

namespace {

constexpr double kMinClassWeight = 1e-9;

void check_centroids(const Centroids& c, std::size_t d_p) {
  if (c.cols() != d_p)
    throw ArgumentError("centroid dimension " + std::to_string(c.cols()) +
                        " does not match d_p = " + std::to_string(d_p));
  for (std::size_t k = 0; k < c.rows(); ++k)
    if (norm2(c.row(k)) == 0.0)
      throw DegenerateClassError(k, "centroid " + std::to_string(k) + " has zero norm");
}

}  // namespace

Centroids compute_centroids(const Dataset& ds, const ModelParams& source_head) {
  if (source_head.num_classes() != ds.k || source_head.feature_dim() != ds.d_f())
    throw ArgumentError("compute_centroids: source head is " +
                        std::to_string(source_head.num_classes()) + "x" +
                        std::to_string(source_head.feature_dim()) + ", dataset needs " +
                        std::to_string(ds.k) + "x" + std::to_string(ds.d_f()));
  const Mat probs = forward_probs(source_head, ds.features_f);
  Centroids c(ds.k, ds.d_p());
  Vec weight(ds.k, 0.0);
  // Serial accumulation in row order keeps the sums bit-reproducible.
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto p = probs.row(i);
    const auto fp = ds.features_p.row(i);
    for (std::size_t k = 0; k < ds.k; ++k) {
      weight[k] += p[k];
      auto ck = c.row(k);
      for (std::size_t j = 0; j < fp.size(); ++j) ck[j] += p[k] * fp[j];
    }
  }
  for (std::size_t k = 0; k < ds.k; ++k) {
    if (weight[k] < kMinClassWeight)
      throw DegenerateClassError(k, "compute_centroids: class " + std::to_string(k) +
                                        " has total source probability " +
                                        std::to_string(weight[k]) + " < 1e-9");
    for (double& v : c.row(k)) v /= weight[k];
    if (norm2(c.row(k)) == 0.0)
      throw DegenerateClassError(k, "compute_centroids: centroid " + std::to_string(k) +
                                        " is the zero vector");
  }
  return c;
}

Vec cosine_logits(std::span<const double> feature_p, const Centroids& centroids) {
  Vec s(centroids.rows());
  for (std::size_t k = 0; k < centroids.rows(); ++k)
    s[k] = cosine_similarity(feature_p, centroids.row(k));
  return s;
}

Labels assign_pseudo_labels(const Dataset& ds, const Centroids& centroids) {
  check_centroids(centroids, ds.d_p());
  for (std::size_t i = 0; i < ds.n(); ++i)
    if (norm2(ds.features_p.row(i)) == 0.0)
      throw DegenerateInputError("assign_pseudo_labels: features_p row " + std::to_string(i) +
                                 " has zero norm");
  Labels out(ds.n());
  parallel_for(ds.n(), [&](std::size_t i) {
    out[i] = argmax(cosine_logits(ds.features_p.row(i), centroids));
  });
  return out;
}

PriorMatrix compute_prior_matrix(const Mat& features_p, std::span<const std::size_t> pseudo_labels,
                                 const Centroids& centroids, double tau, EmptyClassPolicy policy) {
  if (!(tau > 0.0)) throw ArgumentError("compute_prior_matrix: tau must be positive");
  if (pseudo_labels.size() != features_p.rows())
    throw ArgumentError("compute_prior_matrix: pseudo-label count does not match rows");
  check_centroids(centroids, features_p.cols());
  const std::size_t k = centroids.rows();
  const std::size_t n = features_p.rows();
  for (std::size_t i = 0; i < n; ++i) {
    if (pseudo_labels[i] >= k)
      throw ArgumentError("compute_prior_matrix: pseudo-label row " + std::to_string(i) +
                          " out of range");
    if (norm2(features_p.row(i)) == 0.0)
      throw DegenerateInputError("compute_prior_matrix: features_p row " + std::to_string(i) +
                                 " has zero norm");
  }

  Mat soft(n, k);
  parallel_for(n, [&](std::size_t i) {
    const Vec s = softmax_temp(cosine_logits(features_p.row(i), centroids), tau);
    std::copy(s.begin(), s.end(), soft.row(i).begin());
  });

  PriorMatrix prior;
  prior.tau = tau;
  prior.matrix = Mat(k, k);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row = pseudo_labels[i];
    ++count[row];
    auto dst = prior.matrix.row(row);
    const auto src = soft.row(i);
    for (std::size_t j = 0; j < k; ++j) dst[j] += src[j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    auto row = prior.matrix.row(c);
    if (count[c] == 0) {
      if (policy == EmptyClassPolicy::kThrow)
        throw DegenerateClassError(c, "compute_prior_matrix: no sample is pseudo-labeled " +
                                          std::to_string(c));
      row[c] = 1.0;
      prior.warnings.push_back("pseudo-class " + std::to_string(c) +
                               " is empty; prior row set to one-hot");
      continue;
    }
    for (double& v : row) v /= static_cast<double>(count[c]);
  }
  return prior;
}

PriorMatrix compute_prior_matrix(const Dataset& ds, const Centroids& centroids, double tau,
                                 EmptyClassPolicy policy) {
  if (!ds.pseudo_labels)
    throw ArgumentError("compute_prior_matrix: dataset has no pseudo-labels assigned");
  return compute_prior_matrix(ds.features_p, *ds.pseudo_labels, centroids, tau, policy);
}

}  // namespace dcpl
