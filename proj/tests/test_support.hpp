#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <unistd.h>

#include "dcpl/dataset.hpp"
#include "dcpl/model.hpp"
#include "dcpl/rng.hpp"

namespace dcpl::testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("dcpl-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// Random dataset with both views and labels in [0, k).
inline Dataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t k, std::size_t d_f,
                              std::size_t d_p) {
  SplitMix64 rng(seed);
  Dataset ds;
  ds.k = k;
  ds.features_f = Mat(n, d_f);
  ds.features_p = Mat(n, d_p);
  for (double& x : ds.features_f.values()) x = rng.normal();
  for (double& x : ds.features_p.values()) x = rng.normal();
  Labels y(n);
  for (auto& v : y) v = static_cast<std::size_t>(rng.below(k));
  ds.true_labels = y;
  return ds;
}

// Upper bound on |ce_noisy - plain CE| for a transition frozen at beta = 30.
// Each sample is off by at most k e^-30 / (p_y + 1e-12), so confident wrong
// predictions widen the gap.
inline double frozen_identity_gap_bound(const ModelParams& head, const Mat& features,
                                        const Labels& labels) {
  const Mat p = forward_probs(head, features);
  const double k = static_cast<double>(head.num_classes());
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) sum += k * std::exp(-30.0) / (p(i, labels[i]) + 1e-12);
  return sum / static_cast<double>(labels.size()) * (1.0 + 1e-6) + 1e-13;
}

}  // namespace dcpl::testing
