#include "memsde/error.hpp"
#include "memsde/measure.hpp"
#include "memsde/noise.hpp"

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace memsde;

namespace {

SampleMatrix gaussian_cloud(std::size_t n, std::size_t d, std::uint64_t seed, double shift = 0.0, double scale = 1.0) {
  CounterStream g(seed, 0, Purpose::Sampling);
  SampleMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = shift + scale * g.normal();
  return x;
}

EmpiricalMeasure cloud(std::size_t n, std::size_t d, std::uint64_t seed, double shift = 0.0, double scale = 1.0) {
  return EmpiricalMeasure(gaussian_cloud(n, d, seed, shift, scale));
}

// E|Δμ + Δs·Z| for Z standard normal: the W1 distance under the quantile coupling.
double folded_normal_mean(double dm, double ds) {
  ds = std::abs(ds);
  if (ds == 0.0) return std::abs(dm);
  const boost::math::normal_distribution<double> n01;
  return ds * std::sqrt(2.0 / M_PI) * std::exp(-dm * dm / (2.0 * ds * ds)) +
         dm * (1.0 - 2.0 * boost::math::cdf(n01, -dm / ds));
}

// ∫|F_n − Φ_{m,s}| by the trapezoid rule over a fine grid.
double w1_to_gaussian_quadrature(std::vector<double> x, double m, double s) {
  std::sort(x.begin(), x.end());
  const boost::math::normal_distribution<double> law(m, s);
  const double lo = std::min(x.front(), m - 12 * s), hi = std::max(x.back(), m + 12 * s);
  const std::size_t K = 2000000;
  const double h = (hi - lo) / static_cast<double>(K);
  double acc = 0.0, prev = 0.0;
  std::size_t idx = 0;
  for (std::size_t k = 0; k <= K; ++k) {
    const double t = lo + h * static_cast<double>(k);
    while (idx < x.size() && x[idx] <= t) ++idx;
    const double f = std::abs(static_cast<double>(idx) / static_cast<double>(x.size()) - boost::math::cdf(law, t));
    if (k > 0) acc += 0.5 * h * (f + prev);
    prev = f;
  }
  return acc;
}

}  // namespace

TEST(PairwiseSum, MatchesLongDouble) {
  CounterStream g(1, 0, Purpose::Sampling);
  std::vector<double> x(100001);
  long double ref = 0.0L;
  for (auto& v : x) {
    v = g.uniform() * 1e3;
    ref += v;
  }
  EXPECT_NEAR(pairwise_sum(x.data(), x.size()), static_cast<double>(ref), 1e-12 * static_cast<double>(ref));
  EXPECT_EQ(pairwise_sum(x.data(), 0), 0.0);
}

TEST(EmpiricalMeasureTest, RejectsBadInput) {
  EXPECT_THROW(EmpiricalMeasure(SampleMatrix(0, 1)), Error);
  SampleMatrix bad(2, 1);
  bad << 1.0, std::nan("");
  EXPECT_THROW(EmpiricalMeasure{bad}, Error);
  Ensemble e;
  e.samples = SampleMatrix::Constant(2, 1, std::numeric_limits<double>::infinity());
  e.diverged = {0, 3};
  try {
    EmpiricalMeasure::from_ensemble(e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::EmptyAfterExclusion);
  }
}

TEST(W1, SortedEqualsMatchingInOneDimension) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    const auto a = cloud(64, 1, 2 * k), b = cloud(64, 1, 2 * k + 1, 0.3, 1.5);
    EXPECT_NEAR(wasserstein1_sorted(a, b), wasserstein1_matching(a, b), 1e-12);
  }
}

TEST(W1, SortedExample) {
  SampleMatrix a(3, 1), b(3, 1);
  a << 0.0, 1.0, 2.0;
  b << 5.0, 3.0, 4.0;
  EXPECT_DOUBLE_EQ(wasserstein1_sorted(EmpiricalMeasure(a), EmpiricalMeasure(b)), 3.0);
}

TEST(W1, MetricAxiomsInTwoDimensions) {
  const auto a = cloud(60, 2, 1), b = cloud(60, 2, 2, 0.5), c = cloud(60, 2, 3, -0.2, 2.0);
  EXPECT_NEAR(wasserstein1_matching(a, a), 0.0, 1e-15);
  EXPECT_NEAR(wasserstein1_matching(a, b), wasserstein1_matching(b, a), 1e-12);
  EXPECT_LE(wasserstein1_matching(a, c), wasserstein1_matching(a, b) + wasserstein1_matching(b, c) + 1e-12);
}

TEST(W1, BoundedByAnyCoupling) {
  const auto a = cloud(100, 3, 4), b = cloud(100, 3, 5, 1.0);
  double paired = 0.0;
  for (Eigen::Index i = 0; i < 100; ++i) paired += (a.points.row(i) - b.points.row(i)).norm();
  EXPECT_LE(wasserstein1_matching(a, b), paired / 100.0 + 1e-12);
  // Lower bound by the distance of means.
  const double mean_gap = (a.points.colwise().mean() - b.points.colwise().mean()).norm();
  EXPECT_GE(wasserstein1_matching(a, b), mean_gap - 1e-12);
}

TEST(W1, UnequalCountsRejected) {
  try {
    wasserstein1_sorted(cloud(10, 1, 1), cloud(11, 1, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnequalCounts);
  }
  try {
    wasserstein1_matching(cloud(513, 1, 1), cloud(513, 1, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooLarge);
  }
}

TEST(Sliced, EqualsSortedInOneDimension) {
  const auto a = cloud(200, 1, 6), b = cloud(200, 1, 7, 0.4);
  EXPECT_NEAR(wasserstein1_sliced(a, b, 16, 3), wasserstein1_sorted(a, b), 1e-12);
}

TEST(Sliced, BelowMatchingUpToDirectionNoise) {
  const auto a = cloud(300, 3, 8), b = cloud(300, 3, 9, 0.5, 1.3);
  const auto s = wasserstein1_sliced_detail(a, b, 128, 1);
  EXPECT_LE(s.value, wasserstein1_matching(a, b) + 3.0 * s.direction_se);
  EXPECT_GT(s.direction_se, 0.0);
}

TEST(Sliced, IncreasesWithTranslation) {
  const auto a = cloud(200, 2, 10);
  double prev = -1.0;
  for (double delta : {0.0, 0.1, 0.5, 1.0, 3.0}) {
    SampleMatrix shifted = a.points;
    shifted.col(0).array() += delta;
    const double w = wasserstein1_sliced(a, EmpiricalMeasure(shifted), 64, 5);
    EXPECT_GT(w, prev);
    prev = w;
  }
}

TEST(Sliced, DeterministicInSeed) {
  const auto a = cloud(100, 2, 11), b = cloud(100, 2, 12);
  EXPECT_EQ(wasserstein1_sliced(a, b, 32, 9), wasserstein1_sliced(a, b, 32, 9));
  EXPECT_NE(wasserstein1_sliced(a, b, 32, 9), wasserstein1_sliced(a, b, 32, 10));
}

TEST(Gaussian, ClosedFormW1) {
  for (auto [m1, s1, m2, s2] : std::vector<std::array<double, 4>>{
           {0, 1, 0, 1}, {0, 1, 1, 1}, {0, 1, 0, 2}, {1, 0.5, -0.3, 1.7}, {2, 1, 2.1, 0.2}})
    EXPECT_NEAR(gaussian_w1_1d(m1, s1, m2, s2), folded_normal_mean(m1 - m2, s1 - s2), 1e-10);
  EXPECT_NEAR(gaussian_w1_1d(0, 1, 0, 2), std::sqrt(2.0 / M_PI), 1e-10);
}

TEST(Gaussian, EmpiricalToLawMatchesQuadrature) {
  const auto a = cloud(500, 1, 13, 0.2, 0.9);
  std::vector<double> x(a.points.data(), a.points.data() + 500);
  EXPECT_NEAR(w1_to_gaussian_1d(a, 0.0, 1.0), w1_to_gaussian_quadrature(x, 0.0, 1.0), 1e-6);
  EXPECT_NEAR(w1_to_gaussian_1d(a, 0.5, 2.0), w1_to_gaussian_quadrature(x, 0.5, 2.0), 1e-6);
}

TEST(StandardErrors, ToLawTracksReplicateSpread) {
  std::vector<double> w, se;
  for (std::uint64_t r = 0; r < 200; ++r) {
    const auto a = cloud(400, 1, 1000 + r);
    w.push_back(w1_to_gaussian_1d(a, 0.0, 1.0));
    se.push_back(w1_se_to_law(a));
  }
  const double mw = std::accumulate(w.begin(), w.end(), 0.0) / 200.0;
  double var = 0.0;
  for (double v : w) var += (v - mw) * (v - mw);
  const double sd = std::sqrt(var / 199.0);
  const double mse = std::accumulate(se.begin(), se.end(), 0.0) / 200.0;
  EXPECT_GT(mse, 0.5 * sd);
  EXPECT_LT(mse, 3.0 * mw);
}

TEST(StandardErrors, PairedBelowUnpairedForCoupledClouds) {
  const auto a = cloud(1000, 1, 21);
  SampleMatrix b = a.points;
  CounterStream g(5, 0, Purpose::Sampling);
  for (Eigen::Index i = 0; i < b.rows(); ++i) b(i, 0) += 0.05 * g.normal() + 0.1;
  const EmpiricalMeasure bm(b);
  EXPECT_LT(w1_se_paired(a, bm), w1_se_unpaired(a, bm));
  EXPECT_GT(w1_se_paired(a, bm), 0.0);
}

TEST(Subsample, KeepsOrderAndRows) {
  const auto a = cloud(100, 2, 30);
  const auto s = subsample(a, 40, 4);
  ASSERT_EQ(s.size(), 40u);
  Eigen::Index j = 0;
  for (Eigen::Index i = 0; i < 40; ++i) {
    while (j < 100 && (a.points.row(j).array() != s.points.row(i).array()).any()) ++j;
    ASSERT_LT(j, 100);
    ++j;
  }
}

TEST(Moments, ExampleValues) {
  SampleMatrix x(3, 1);
  x << 1.0, -1.0, 2.0;
  const auto r = moments(EmpiricalMeasure(x), {2, 4}, 1);
  EXPECT_DOUBLE_EQ(r.values[0], 2.0);
  EXPECT_DOUBLE_EQ(r.values[1], 6.0);
  EXPECT_EQ(r.n_used, 3u);
  EXPECT_GT(r.std_errors[1], 0.0);
}

TEST(Moments, EnsembleExclusionAndLimits) {
  Ensemble e;
  e.samples.resize(3, 1);
  e.samples << 1.0, std::numeric_limits<double>::infinity(), 3.0;
  e.diverged = {std::nullopt, 2, std::nullopt};
  const auto r = moments(e, {2}, 1);
  EXPECT_DOUBLE_EQ(r.values[0], 5.0);
  EXPECT_EQ(r.n_excluded, 1u);
  try {
    moments(e, {6}, 1, 2.0);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::InvalidArgument);
  }
}
