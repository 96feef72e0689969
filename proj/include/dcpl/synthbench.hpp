#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dcpl/dataset.hpp"
#include "dcpl/losses.hpp"
#include "dcpl/model.hpp"

namespace dcpl {

// Gaussian-cluster source/target pair with a controllable domain gap.
//
// Source classifier view: x = mu_y + e, e ~ N(0, I), class means placed on
// scaled orthonormal directions so every pair of means is class_separation
// apart. Target classifier view: the same clusters pushed through a rotation
// by shift_rotation radians in a random 2-plane plus a translation of
// +-shift_translation in every coordinate. Pretrained view (both domains):
// projection * mu_y + pretrained_noise * e', with an independent e' and one
// random projection per seed. No labels are flipped: pseudo-label noise comes
// from centroids biased by the shifted source head and from the pretrained
// view's own noise.
struct SynthConfig {
  std::size_t k = 5;
  std::size_t d_f = 16;
  std::size_t d_p = 16;
  std::size_t n_source = 2000;
  std::size_t n_target = 2000;
  double class_separation = 4.0;
  double shift_translation = 0.5;
  double shift_rotation = 0.6;
  double pretrained_noise = 1.7;
  std::uint64_t seed = 2020;

  // Throws ArgumentError naming the offending field.
  void validate() const;
  bool operator==(const SynthConfig&) const = default;
};

struct SynthPair {
  Dataset source;
  Dataset target;
};

SynthPair generate_pair(const SynthConfig& cfg);

// Plain cross-entropy minibatch SGD from a zero head, seeded by hp.seed.
ModelParams train_source_head(const Dataset& source, const HyperParams& hp);

struct OracleTransition {
  Mat matrix;  // t_ij = #{pseudo = i, true = j} / #{true = j}
  std::vector<std::string> warnings;
};

// Needs both label arrays. A true class with no samples gets a one-hot
// column and a warning.
OracleTransition oracle_transition(const Dataset& ds);

}  // namespace dcpl
