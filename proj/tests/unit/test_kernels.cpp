#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fsr/geo.hpp"
#include "fsr/kernels.hpp"

namespace fsr::kernels {
namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(u(rng));
  return v;
}

// Plain triple loop in long double.
template <typename T>
std::vector<double> naive(std::size_t m, std::size_t n, std::size_t k, const std::vector<T>& a,
                          const std::vector<T>& b, bool ta, bool tb) {
  std::vector<double> c(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0;
      for (std::size_t p = 0; p < k; ++p) {
        const T x = ta ? a[p * m + i] : a[i * k + p];
        const T y = tb ? b[j * k + p] : b[p * n + j];
        s += static_cast<long double>(x) * y;
      }
      c[i * n + j] = static_cast<double>(s);
    }
  }
  return c;
}

template <typename T>
class GemmTest : public ::testing::Test {};
using Types = ::testing::Types<float, double>;
TYPED_TEST_SUITE(GemmTest, Types);

TYPED_TEST(GemmTest, SerialMatchesNaiveAndParallelIsBitIdentical) {
  using T = TypeParam;
  const double tol = std::is_same_v<T, float> ? 1e-4 : 1e-12;
  std::mt19937_64 rng(7);
  const std::vector<std::array<std::size_t, 3>> shapes = {
      {1, 1, 1}, {3, 5, 7}, {17, 33, 9}, {64, 129, 70}, {5, 300, 2}, {130, 47, 256}};
  for (auto [m, n, k] : shapes) {
    const auto a = random_vec<T>(m * k, rng);
    const auto b = random_vec<T>(k * n, rng);
    for (int variant = 0; variant < 3; ++variant) {
      std::vector<T> cs(m * n, T(0.5)), cp(m * n, T(0.5));
      const bool ta = variant == 2, tb = variant == 1;
      if (variant == 0) {
        serial::gemm_nn(m, n, k, a.data(), b.data(), cs.data(), true);
        parallel::gemm_nn(m, n, k, a.data(), b.data(), cp.data(), true);
      } else if (variant == 1) {
        serial::gemm_nt(m, n, k, a.data(), b.data(), cs.data(), true);
        parallel::gemm_nt(m, n, k, a.data(), b.data(), cp.data(), true);
      } else {
        serial::gemm_tn(m, n, k, a.data(), b.data(), cs.data(), true);
        parallel::gemm_tn(m, n, k, a.data(), b.data(), cp.data(), true);
      }
      EXPECT_EQ(cs, cp) << m << "x" << n << "x" << k << " variant " << variant;
      const auto ref = naive(m, n, k, a, b, ta, tb);
      for (std::size_t i = 0; i < ref.size(); ++i) {
        ASSERT_NEAR(cs[i], ref[i] + 0.5, tol * std::sqrt(static_cast<double>(k)) + tol);
      }
    }
  }
}

TEST(Gemm, OverwriteIgnoresExistingContents) {
  std::vector<double> a = {1, 2, 3, 4}, b = {5, 6, 7, 8}, c(4, 99.0);
  serial::gemm_nn<double>(2, 2, 2, a.data(), b.data(), c.data(), false);
  EXPECT_EQ(c, (std::vector<double>{19, 22, 43, 50}));
}

TEST(SigmoidScores, SerialParallelIdenticalAndCorrect) {
  std::mt19937_64 rng(3);
  const std::size_t n = 777, d = 37;
  const auto rows = random_vec<float>(n * d, rng);
  const auto w = random_vec<float>(d, rng);
  std::vector<float> s(n), p(n);
  serial::sigmoid_scores<float>(rows, w, s);
  parallel::sigmoid_scores<float>(rows, w, p);
  EXPECT_EQ(s, p);
  for (std::size_t i = 0; i < n; i += 31) {
    double dot = 0;
    for (std::size_t j = 0; j < d; ++j) dot += double(rows[i * d + j]) * w[j];
    EXPECT_NEAR(s[i], 1.0 / (1.0 + std::exp(-dot)), 1e-6);
  }
}

TEST(NearestDistance, SerialParallelIdenticalAndMatchesBruteForce) {
  std::mt19937_64 rng(9);
  const auto q = geo::sample_uniform_sphere(rng, 300);
  const auto t = geo::sample_uniform_sphere(rng, 41);
  std::vector<double> qlat, qlon, tlat, tlon;
  for (auto& p : q) qlat.push_back(p.lat()), qlon.push_back(p.lon());
  for (auto& p : t) tlat.push_back(p.lat()), tlon.push_back(p.lon());
  std::vector<double> s(q.size()), p(q.size());
  serial::nearest_distance_km({qlat, qlon}, {tlat, tlon}, s);
  parallel::nearest_distance_km({qlat, qlon}, {tlat, tlon}, p);
  EXPECT_EQ(s, p);
  for (std::size_t i = 0; i < q.size(); ++i) {
    double best = 1e300;
    for (auto& x : t) best = std::min(best, geo::haversine_km(q[i], x));
    EXPECT_DOUBLE_EQ(s[i], best);
  }
}

}  // namespace
}  // namespace fsr::kernels
