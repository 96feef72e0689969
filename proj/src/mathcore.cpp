#include "dcpl/mathcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dcpl/error.hpp"

namespace dcpl {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ArgumentError("Mat: " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                        " needs " + std::to_string(rows_ * cols_) + " values, got " +
                        std::to_string(values_.size()));
  }
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::transposed() const {
  Mat t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void softmax_into(std::span<const double> logits, std::span<double> out) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& o : out) o /= sum;
}

Vec softmax_temp(std::span<const double> logits, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw ArgumentError("softmax_temp: tau must be positive and finite");
  if (logits.empty()) throw ArgumentError("softmax_temp: empty logits");
  if (!all_finite(logits)) throw ArgumentError("softmax_temp: non-finite logit");
  Vec scaled(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / tau;
  Vec out(logits.size());
  softmax_into(scaled, out);
  return out;
}

double cross_entropy_onehot(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size())
    throw ArgumentError("cross_entropy_onehot: label " + std::to_string(label) +
                        " out of range for " + std::to_string(probs.size()) + " classes");
  return -std::log(probs[label] + kLogFloor);
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw ArgumentError("entropy: negative probability");
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ArgumentError("cosine_similarity: dimension mismatch " + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()));
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine_similarity: zero-norm vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double frobenius_sq(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ArgumentError("frobenius_sq: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    s += d * d;
  }
  return s;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace dcpl
