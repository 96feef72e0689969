#pragma once

#include <span>
#include <string>
#include <vector>

#include "dcpl/dataset.hpp"
#include "dcpl/mathcore.hpp"
#include "dcpl/model.hpp"

namespace dcpl {

// k x d_p class centroids in the pretrained-feature space.
using Centroids = Mat;

// Row-stochastic prior over pseudo-label confusions. Row k is the mean
// temperature-softmax of cosine logits over samples pseudo-labeled k.
struct PriorMatrix {
  Mat matrix;
  double tau = 0.01;
  std::vector<std::string> warnings;
};

enum class EmptyClassPolicy {
  kOneHotFallback,  // row becomes e_k and a warning is recorded
  kThrow,           // DegenerateClassError naming the class
};

// Softmax-weighted mean of the pretrained features, weights taken from the
// source head's class probabilities on the classifier view:
//   C_k = sum_x p_k(x) f_p(x) / sum_x p_k(x).
Centroids compute_centroids(const Dataset& ds, const ModelParams& source_head);

// Cosine similarity of one pretrained feature row to every centroid.
Vec cosine_logits(std::span<const double> feature_p, const Centroids& centroids);

// Nearest centroid by cosine similarity, ties to the lowest index.
Labels assign_pseudo_labels(const Dataset& ds, const Centroids& centroids);

PriorMatrix compute_prior_matrix(const Mat& features_p, std::span<const std::size_t> pseudo_labels,
                                 const Centroids& centroids, double tau,
                                 EmptyClassPolicy policy = EmptyClassPolicy::kOneHotFallback);

// Uses ds.pseudo_labels, which must be present.
PriorMatrix compute_prior_matrix(const Dataset& ds, const Centroids& centroids, double tau,
                                 EmptyClassPolicy policy = EmptyClassPolicy::kOneHotFallback);

}  // namespace dcpl
