#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dcpl {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Mat identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  Mat transposed() const;

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Log floor inside cross-entropy: -ln(p + kLogFloor).
inline constexpr double kLogFloor = 1e-12;

bool all_finite(std::span<const double> v);

// Softmax of logits / tau, max-shifted. Throws ArgumentError for tau <= 0 or
// non-finite logits.
Vec softmax_temp(std::span<const double> logits, double tau = 1.0);

// Writes softmax(logits) into out (tau = 1). No validation; hot path.
void softmax_into(std::span<const double> logits, std::span<double> out);

double cross_entropy_onehot(std::span<const double> probs, std::size_t label);

// Shannon entropy in nats, 0 ln 0 := 0.
double entropy(std::span<const double> probs);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// Squared Frobenius distance sum_ij (a_ij - b_ij)^2.
double frobenius_sq(const Mat& a, const Mat& b);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

}  // namespace dcpl
