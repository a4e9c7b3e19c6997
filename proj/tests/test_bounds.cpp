#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <numbers>

#include "support.hpp"

using namespace maxout;

namespace {

// Explicit enumeration of all assignments of non-empty active sets with total excess r.
long long brute_force_patterns(int N, int K, int r) {
  const int subsets = (1 << K) - 1;
  long long count = 0;
  std::vector<int> choice(static_cast<std::size_t>(N), 1);
  for (;;) {
    int excess = 0;
    for (int c : choice) excess += std::popcount(static_cast<unsigned>(c)) - 1;
    count += excess == r;
    int i = 0;
    while (i < N && choice[i] == subsets) choice[i++] = 1;
    if (i == N) break;
    ++choice[i];
  }
  return count;
}

long long pascal(int n, int k) {
  std::vector<std::vector<long long>> t(n + 1);
  for (int i = 0; i <= n; ++i) {
    t[i].assign(i + 1, 1);
    for (int j = 1; j < i; ++j) t[i][j] = t[i - 1][j - 1] + t[i - 1][j];
  }
  return k < 0 || k > n ? 0 : t[n][k];
}

BoundParams params(long long n0, long long N, long long K, long long M = 2, long long r = 0) {
  BoundParams bp;
  bp.n0 = n0;
  bp.N = N;
  bp.K = K;
  bp.M = M;
  bp.r = r;
  return bp;
}

}  // namespace

TEST(PatternCounts, TrivialBound) {
  EXPECT_EQ(trivial_pattern_bound(2, 3, 0), 9);
  EXPECT_EQ(trivial_pattern_bound(3, 2, 1), 12);
  EXPECT_EQ(trivial_pattern_bound(1, 1, 0), 1);
  EXPECT_EQ(trivial_pattern_bound(200, 5, 0), ipow(5, 200));
}

TEST(PatternCounts, ExactCountExamples) {
  EXPECT_EQ(exact_pattern_count(3, 2, 1), 12);
  EXPECT_EQ(exact_pattern_count(2, 3, 1), 18);
  for (int N = 0; N <= 6; ++N)
    for (int K = 1; K <= 6; ++K) EXPECT_EQ(exact_pattern_count(N, K, 0), ipow(K, N));
  // Rank 2 simplifies to C(N, N−r)·2^(N−r).
  for (int N = 0; N <= 8; ++N)
    for (int r = 0; r <= N; ++r) EXPECT_EQ(exact_pattern_count(N, 2, r), binom(N, N - r) * ipow(2, N - r));
}

TEST(PatternCounts, AgreesWithBruteForce) {
  int cases = 0;
  for (int N = 0; N <= 4; ++N)
    for (int K = 1; K <= 4; ++K)
      for (int r = 0; r <= 3; ++r) {
        EXPECT_EQ(exact_pattern_count(N, K, r), BigInt(brute_force_patterns(N, K, r)))
            << "N=" << N << " K=" << K << " r=" << r;
        ++cases;
      }
  EXPECT_EQ(cases, 80);
}

TEST(PatternCounts, ExactNeverExceedsTrivial) {
  for (int N = 0; N <= 6; ++N)
    for (int K = 1; K <= 6; ++K)
      for (int r = 0; r <= std::min(N, 4); ++r)
        EXPECT_LE(exact_pattern_count(N, K, r), trivial_pattern_bound(N, K, r));
}

// Excess above N needs units with three or more active features; the product formula is zero there.
TEST(PatternCounts, TrivialFormulaVanishesAboveN) {
  EXPECT_EQ(trivial_pattern_bound(1, 3, 2), 0);
  EXPECT_EQ(exact_pattern_count(1, 3, 2), 1);
  EXPECT_EQ(exact_pattern_count(2, 3, 3), 6);
  EXPECT_EQ(exact_pattern_count(2, 2, 3), 0);
}

TEST(RegionCounts, GenericLowerBound) {
  EXPECT_EQ(generic_lower_bound(2, 3).regions, 7);
  EXPECT_EQ(generic_lower_bound(2, 3).bounded_regions, 1);
  EXPECT_EQ(generic_lower_bound(1, 1).regions, 2);
  EXPECT_EQ(generic_lower_bound(1, 1).bounded_regions, 0);
  EXPECT_EQ(generic_lower_bound(3, 5).regions, 26);
  EXPECT_EQ(generic_lower_bound(3, 5).bounded_regions, 4);
  for (int n0 = 0; n0 <= 6; ++n0)
    for (int n1 = 0; n1 <= 10; ++n1) {
      long long s = 0;
      for (int j = 0; j <= n0; ++j) s += pascal(n1, j);
      EXPECT_EQ(generic_lower_bound(n0, n1).regions, s);
      EXPECT_EQ(generic_lower_bound(n0, n1).bounded_regions, n1 >= 1 ? pascal(n1 - 1, n0) : 0);
    }
}

TEST(RegionCounts, LayerPositiveMeasure) {
  EXPECT_EQ(layer_positive_measure_count(2, {3, 3}), 9);
  EXPECT_EQ(layer_positive_measure_count(4, {1, 1, 1}), 1);
  EXPECT_EQ(layer_positive_measure_count(2, {2, 3, 4}), 18);
  // Direct subset enumeration.
  const std::vector<long long> ks{2, 5, 3, 4, 2};
  for (int n0 = 0; n0 <= 5; ++n0) {
    long long total = 0;
    for (unsigned mask = 0; mask < 32; ++mask) {
      if (std::popcount(mask) > n0) continue;
      long long prod = 1;
      for (int i = 0; i < 5; ++i)
        if (mask >> i & 1) prod *= ks[i] - 1;
      total += prod;
    }
    EXPECT_EQ(layer_positive_measure_count(n0, ks), total);
  }
}

TEST(RegionCounts, DeepGrid) {
  EXPECT_EQ(deep_grid_count(1, {{2}, {2}}, {2, 2}), 9);
  EXPECT_EQ(deep_grid_count(1, {{1}, {1}}, {2, 2}), 1);
  EXPECT_EQ(deep_grid_count(2, {{2, 3}}, {4}), 15);
  EXPECT_THROW(deep_grid_count(2, {{2, 2}}, {6}), Error);
}

TEST(RegionCounts, ShallowMaximum) {
  EXPECT_EQ(max_regions_shallow(2, 3, 3), 19);
  EXPECT_EQ(max_regions_shallow(3, 7, 1), 1);
  EXPECT_EQ(max_regions_shallow(2, 3, 2), 7);
  for (int n0 = 0; n0 <= 4; ++n0)
    for (int n1 = 0; n1 <= 8; ++n1) EXPECT_EQ(max_regions_shallow(n0, n1, 2), generic_lower_bound(n0, n1).regions);
}

TEST(RegionCounts, DeepMaximumBounds) {
  auto r = max_regions_deep_bounds(1, {2, 2}, 2, 1);
  EXPECT_EQ(r.lower, 9);
  EXPECT_EQ(r.upper, 9);
  r = max_regions_deep_bounds(2, {4, 4}, 1, 2);
  EXPECT_EQ(r.lower, 1);
  EXPECT_EQ(r.upper, 1);
  r = max_regions_deep_bounds(2, {4, 4}, 2, 2);
  EXPECT_EQ(r.lower, 81);
  EXPECT_EQ(r.upper, 121);
  EXPECT_THROW(max_regions_deep_bounds(2, {4}, 2, 3), Error);
}

TEST(ExpectedBounds, RegionDensity) {
  EXPECT_DOUBLE_EQ(expected_regions_upper(params(1, 2, 2), true), 128.0);
  // Small-network branch reduces to the pattern count.
  EXPECT_DOUBLE_EQ(expected_regions_upper(params(3, 2, 3), true), 9.0);
  EXPECT_DOUBLE_EQ(expected_regions_upper(params(2, 2, 3), true), 9.0);
  // (32·2·4)^2 · C(4,4) / ((2·2)^1 · 2!) = 65536 / 8.
  EXPECT_DOUBLE_EQ(expected_regions_upper(params(2, 4, 2, 2, 1), true), 8192.0);
  EXPECT_THROW(expected_regions_upper(params(1, 2, 2), false), Error);
  EXPECT_THROW(expected_regions_upper(params(1, 2, 2, 2, 2), true), Error);
}

TEST(ExpectedBounds, LocusVolume) {
  EXPECT_DOUBLE_EQ(volume_upper(params(3, 3, 2), 1), 6.0);
  EXPECT_DOUBLE_EQ(volume_upper(params(3, 3, 2), 0), 1.0);
  EXPECT_DOUBLE_EQ(volume_upper(params(3, 4, 3), 2), 360.0);
}

TEST(DecisionBounds, PatternBound) {
  EXPECT_EQ(db_pattern_bound(1, 2, 1, 2), 2);
  EXPECT_EQ(db_pattern_bound(0, 2, 1, 2), 1);
  // i=1: C(3,2)·C(2,2)·C(2,1)·2^1 = 12; i=2: C(3,3)·C(0,0)·C(2,0)·2^2 = 4.
  EXPECT_EQ(db_pattern_bound(2, 2, 2, 3), 16);
}

TEST(DecisionBounds, ExpectedPieces) {
  EXPECT_DOUBLE_EQ(db_expected_upper(params(1, 1, 2)), 2.0);
  EXPECT_DOUBLE_EQ(db_expected_upper(params(1, 2, 2)), 16.0);
  EXPECT_DOUBLE_EQ(db_expected_upper(params(2, 5, 2, 1)), 0.0);
}

TEST(DecisionBounds, Volume) {
  EXPECT_DOUBLE_EQ(db_volume_upper(params(2, 1, 2), 1), 2.0);
  EXPECT_DOUBLE_EQ(db_volume_upper(params(2, 1, 2, 1), 1), 0.0);
  EXPECT_DOUBLE_EQ(db_volume_upper(params(2, 2, 2, 3), 2), 28.0);
}

TEST(DecisionBounds, Distance) {
  EXPECT_DOUBLE_EQ(db_distance_lower(params(2, 3, 2), 1.0), 0.125);
  EXPECT_DOUBLE_EQ(db_distance_lower(params(1, 3, 2), 1.0), 0.125);
  EXPECT_DOUBLE_EQ(db_distance_lower(params(2, 3, 2), 0.0), 0.0);
  EXPECT_TRUE(std::isinf(db_distance_lower(params(2, 3, 2, 1), 1.0)));
}

TEST(ZeroBias, Bound) {
  EXPECT_DOUBLE_EQ(zero_bias_upper(3, 2, 3, 1.0), 9.0);
  EXPECT_DOUBLE_EQ(zero_bias_upper(1, 7, 4, 5.0), 2.0);
  EXPECT_DOUBLE_EQ(zero_bias_upper(2, 3, 2, 1.0), 24.0);
}

TEST(Constants, MaxoutHeStd) {
  EXPECT_DOUBLE_EQ(maxout_he_std(2, 100, DistShape::Normal), 0.1);
  EXPECT_NEAR(maxout_he_std(5, 100, DistShape::Normal), 0.07453, 1e-5);
  const double pi = std::numbers::pi;
  EXPECT_DOUBLE_EQ(maxout_he_std(3, 10, DistShape::Normal), std::sqrt(2 * pi / ((std::sqrt(3.0) + 2 * pi) * 10)));
  EXPECT_DOUBLE_EQ(maxout_he_std(4, 10, DistShape::Normal), std::sqrt(pi / ((std::sqrt(3.0) + pi) * 10)));
  for (int n : {1, 7, 100}) EXPECT_NEAR(maxout_he_std(2, n, DistShape::Uniform), std::sqrt(1.0 / n), 1e-15);
  EXPECT_THROW(maxout_he_std(6, 10, DistShape::Normal), Error);
  EXPECT_DOUBLE_EQ(relu_he_std(8), 0.5);
  EXPECT_DOUBLE_EQ(c_bias_normal(1.0), 1.0 / std::sqrt(2 * pi));
}

// Monte Carlo check of the uniform-law gain: E[max_k U_k^2] / Var[U] for U ~ U(-1, 1).
TEST(Constants, UniformGainMatchesSimulation) {
  std::mt19937_64 eng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int K : {2, 3, 5}) {
    double acc = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
      double m = u(eng);
      for (int k = 1; k < K; ++k) m = std::max(m, u(eng));
      acc += m * m;
    }
    const double gain = acc / n * 3.0;
    const double s = maxout_he_std(K, 1, DistShape::Uniform);
    EXPECT_NEAR(gain * s * s, 1.0, 0.01) << "K=" << K;
  }
}

TEST(Constants, BinomRealSwitchesToLogGamma) {
  EXPECT_NEAR(binom_real(2000, 3), 2000.0 * 1999 * 1998 / 6, 1e-6 * 2000.0 * 1999 * 1998 / 6);
  EXPECT_DOUBLE_EQ(binom_real(10, 3), 120.0);
}

TEST(Cgrad, RankOneMatchesChiSquaredMean) {
  const Architecture arch{3, {5, 4}, 1, 2};
  const auto est = estimate_cgrad_bound(arch, 2.0, 2.0, 100000, 7);
  ASSERT_EQ(est.layer_moments.size(), 2u);
  EXPECT_NEAR(est.layer_moments[0] / (2.0 * 3), 1.0, 0.02);
  EXPECT_NEAR(est.layer_moments[1] / (2.0 * 5), 1.0, 0.02);
}

TEST(Cgrad, DegenerateAndReproducible) {
  const Architecture bare{4, {}, 2, 3};
  const auto est = estimate_cgrad_bound(bare, 1.0, 2.0, 10000, 1);
  EXPECT_TRUE(est.layer_moments.empty());
  EXPECT_DOUBLE_EQ(est.value, std::sqrt(1.0 / 4) * std::sqrt(3.0));
  const Architecture arch{2, {3, 3}, 3, 2};
  const auto a = estimate_cgrad_bound(arch, 1.5, 3.0, 10000, 9);
  const auto b = estimate_cgrad_bound(arch, 1.5, 3.0, 10000, 9);
  EXPECT_EQ(a.value, b.value);
  EXPECT_GT(a.value, 0.0);
}

TEST(SingleUnitScan, Basics) {
  const Window huge = Window::cube(1, -1e6, 1e6);
  const auto rows = single_unit_expected_scan(1, {1, 2}, 30, 3, huge);
  EXPECT_EQ(rows[0].mean, 1.0);
  EXPECT_EQ(rows[1].mean, 2.0);
  const auto grow = single_unit_expected_scan(2, {1, 2, 4, 8, 16}, 40, 5, Window::cube(2, -1e3, 1e3));
  for (std::size_t i = 1; i < grow.size(); ++i) EXPECT_GE(grow[i].mean, grow[i - 1].mean);
}
