#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dcpl/error.hpp"
#include "dcpl/mathcore.hpp"
#include "dcpl/rng.hpp"

using namespace dcpl;

namespace {

double sum(const Vec& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

Vec random_vec(SplitMix64& rng, std::size_t n, double scale) {
  Vec v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("softmax_temp hand values") {
  const Vec u = softmax_temp(Vec{1.0, 1.0, 1.0}, 1.0);
  for (double p : u) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const Vec v = softmax_temp(Vec{std::log(2.0), 0.0, 0.0}, 1.0);
  CHECK(v[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(v[1] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(v[2] == doctest::Approx(0.25).epsilon(1e-14));

  const Vec sharp = softmax_temp(Vec{0.9, 0.1}, 0.01);
  CHECK(sharp[0] >= 1.0 - 1e-30);
}

TEST_CASE("softmax_temp survives logits that overflow a naive exp") {
  const Vec p = softmax_temp(Vec{1000.0, 999.0}, 0.01);
  CHECK(all_finite(p));
  CHECK(sum(p) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax_temp rejects bad temperature and non-finite logits") {
  CHECK_THROWS_AS(softmax_temp(Vec{1.0, 2.0}, 0.0), ArgumentError);
  CHECK_THROWS_AS(softmax_temp(Vec{1.0, 2.0}, -1.0), ArgumentError);
  CHECK_THROWS_AS(softmax_temp(Vec{1.0, NAN}, 1.0), ArgumentError);
  CHECK_THROWS_AS(softmax_temp(Vec{INFINITY, 0.0}, 1.0), ArgumentError);
}

TEST_CASE("property: softmax_temp normalizes and is shift invariant") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(12);
    const Vec l = random_vec(rng, n, 5.0);
    const double tau = rng.uniform(0.01, 3.0);
    const Vec p = softmax_temp(l, tau);
    CHECK(std::abs(sum(p) - 1.0) < 1e-12);

    Vec shifted = l;
    const double c = rng.uniform(-50.0, 50.0);
    for (double& x : shifted) x += c;
    const Vec q = softmax_temp(shifted, tau);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-12);
  }
}

TEST_CASE("property: softmax_temp(l, tau) == softmax_temp(l / tau, 1) exactly") {
  SplitMix64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(8);
    const Vec l = random_vec(rng, n, 3.0);
    const double tau = rng.uniform(0.01, 2.0);
    Vec scaled = l;
    for (double& x : scaled) x /= tau;
    CHECK(softmax_temp(l, tau) == softmax_temp(scaled, 1.0));
  }
}

TEST_CASE("cross_entropy_onehot hand values") {
  CHECK(cross_entropy_onehot(Vec{0.0, 1.0, 0.0}, 1) == doctest::Approx(-std::log1p(1e-12)).epsilon(1e-12));
  CHECK(cross_entropy_onehot(Vec{0.5, 0.5}, 0) == doctest::Approx(0.693147180559945).epsilon(1e-11));
  CHECK(cross_entropy_onehot(Vec{0.74, 0.26}, 0) == doctest::Approx(0.3011050927839216).epsilon(1e-11));
  // The log floor keeps a zero probability finite.
  CHECK(std::isfinite(cross_entropy_onehot(Vec{1.0, 0.0}, 1)));
  CHECK_THROWS_AS(cross_entropy_onehot(Vec{0.5, 0.5}, 2), ArgumentError);
}

TEST_CASE("entropy hand values") {
  CHECK(entropy(Vec{0.25, 0.25, 0.25, 0.25}) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(entropy(Vec{0.0, 1.0, 0.0}) == 0.0);
  CHECK(entropy(Vec{0.5, 0.5}) == doctest::Approx(0.693147180559945).epsilon(1e-13));
  CHECK_THROWS_AS(entropy(Vec{-0.1, 1.1}), ArgumentError);
}

TEST_CASE("property: entropy is maximal at uniform, zero at one-hot") {
  SplitMix64 rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + rng.below(9);
    const Vec p = softmax_temp(random_vec(rng, k, 2.0));
    CHECK(entropy(p) <= std::log(static_cast<double>(k)) + 1e-12);
    CHECK(entropy(p) > 0.0);
    Vec onehot(k, 0.0);
    onehot[rng.below(k)] = 1.0;
    CHECK(std::abs(entropy(onehot)) < 1e-12);
  }
}

TEST_CASE("cosine_similarity hand values") {
  CHECK(cosine_similarity(Vec{3.0, -1.0}, Vec{3.0, -1.0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(Vec{1.0, 0.0}, Vec{0.0, 2.0}) == 0.0);
  CHECK(cosine_similarity(Vec{1.0, 0.0}, Vec{1.0, 1.0}) ==
        doctest::Approx(0.7071067811865476).epsilon(1e-14));
  CHECK_THROWS_AS(cosine_similarity(Vec{0.0, 0.0}, Vec{1.0, 1.0}), DegenerateInputError);
  CHECK_THROWS_AS(cosine_similarity(Vec{1.0}, Vec{1.0, 1.0}), ArgumentError);
}

TEST_CASE("property: cosine_similarity is scale invariant") {
  SplitMix64 rng(14);
  for (int trial = 0; trial < 300; ++trial) {
    const Vec a = random_vec(rng, 6, 1.0);
    const Vec b = random_vec(rng, 6, 1.0);
    Vec a2 = a, b2 = b;
    const double alpha = rng.uniform(1e-3, 1e3);
    const double beta = rng.uniform(1e-3, 1e3);
    for (double& x : a2) x *= alpha;
    for (double& x : b2) x *= beta;
    CHECK(std::abs(cosine_similarity(a, b) - cosine_similarity(a2, b2)) < 1e-12);
  }
}

TEST_CASE("frobenius_sq hand values") {
  const Mat i2 = Mat::identity(2);
  CHECK(frobenius_sq(i2, i2) == 0.0);
  CHECK(frobenius_sq(i2, Mat(2, 2)) == 2.0);
  const Mat t(2, 2, {0.9, 0.1, 0.1, 0.9});
  CHECK(frobenius_sq(i2, t) == doctest::Approx(0.04).epsilon(1e-14));
  CHECK_THROWS_AS(frobenius_sq(i2, Mat(3, 3)), ArgumentError);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(argmax(Vec{0.25, 0.25, 0.25, 0.25}) == 0);
  CHECK(argmax(Vec{0.1, 0.8, 0.1}) == 1);
  CHECK(argmax(Vec{0.0, 2.0, 2.0}) == 1);
}

TEST_CASE("Mat construction and transpose") {
  const Mat m(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m(1, 2) == 6.0);
  const Mat t = m.transposed();
  CHECK(t.rows() == 3);
  CHECK(t(2, 1) == 6.0);
  CHECK(t.transposed() == m);
  CHECK_THROWS_AS(Mat(2, 2, std::vector<double>{1.0, 2.0, 3.0}), ArgumentError);
}

TEST_CASE("SplitMix64 matches the reference sequence") {
  SplitMix64 rng(0);
  CHECK(rng.next() == 0xe220a8397b1dcdafULL);
  CHECK(rng.next() == 0x6e789e6aa1b965f4ULL);
  CHECK(rng.next() == 0x06c45d188009454fULL);
}

TEST_CASE("SplitMix64 derived draws stay in range and are reproducible") {
  SplitMix64 a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
    const auto k = a.below(7);
    CHECK(k < 7);
    CHECK(k == b.below(7));
  }
  double mean = 0.0, sq = 0.0;
  SplitMix64 n(7);
  const int count = 20000;
  for (int i = 0; i < count; ++i) {
    const double z = n.normal();
    mean += z;
    sq += z * z;
  }
  mean /= count;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(sq / count - 1.0) < 0.05);
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  SplitMix64 a(3), b(3);
  a.shuffle(std::span<int>(v));
  b.shuffle(std::span<int>(w));
  CHECK(v == w);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}
