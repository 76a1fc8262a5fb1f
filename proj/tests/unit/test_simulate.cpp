#include "memsde/error.hpp"
#include "memsde/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace memsde;

namespace {

SdeProblem ou(double theta = 1.0, double sigma = 1.0) {
  return make_builtin("ornstein_uhlenbeck", {{"theta", theta}, {"sigma", sigma}});
}

InitialCondition point1(double x) { return InitialCondition::point(Vec::Constant(1, x)); }

bool same(const Ensemble& a, const Ensemble& b) {
  return a.samples.rows() == b.samples.rows() && (a.samples.array() == b.samples.array()).all() &&
         a.diverged == b.diverged;
}

}  // namespace

TEST(StepCount, IntegerHorizons) {
  EXPECT_EQ(step_count(1.0, 0.01), 100);
  EXPECT_EQ(step_count(10.0, 1.0 / 512.0), 5120);
  EXPECT_THROW(step_count(1.0, 0.3), Error);
  EXPECT_THROW(step_count(1.0, 0.0), Error);
  EXPECT_THROW(step_count(-1.0, 0.1), Error);
}

TEST(Simulate, DeterministicAcrossCallsAndWorkers) {
  const auto p = make_builtin("double_well", {{"d", 2}});
  const auto s = SchemeSpec::tem(3.0);
  const auto x0 = InitialCondition::gaussian({Vec::Zero(2), Vec::Constant(2, 1.0)});
  SimulationOptions w1, w2, w8;
  w2.workers = 2;
  w8.workers = 8;
  const auto a = simulate_ensemble(p, s, x0, 0.01, 0.5, 700, 42, w1);
  const auto b = simulate_ensemble(p, s, x0, 0.01, 0.5, 700, 42, w1);
  const auto c = simulate_ensemble(p, s, x0, 0.01, 0.5, 700, 42, w2);
  const auto d = simulate_ensemble(p, s, x0, 0.01, 0.5, 700, 42, w8);
  EXPECT_TRUE(same(a, b));
  EXPECT_TRUE(same(a, c));
  EXPECT_TRUE(same(a, d));
  const auto e = simulate_ensemble(p, s, x0, 0.01, 0.5, 700, 43, w1);
  EXPECT_FALSE(same(a, e));
}

TEST(Simulate, PrefixOfLargerRunIsIdentical) {
  const auto p = ou();
  const auto s = SchemeSpec::tem(1.5);
  const auto small = simulate_ensemble(p, s, point1(1.0), 0.05, 1.0, 300, 7);
  const auto big = simulate_ensemble(p, s, point1(1.0), 0.05, 1.0, 900, 7);
  EXPECT_TRUE((small.samples.array() == big.samples.topRows(300).array()).all());
}

TEST(Simulate, OrnsteinUhlenbeckMeanAndVariance) {
  // Euler for OU: mean (1−θτ)^N x0, variance σ²τ Σ_k (1−θτ)^{2k}.
  const double tau = 0.01, T = 1.0, x0 = 2.0;
  const std::size_t M = 20000;
  const auto e = simulate_ensemble(ou(), SchemeSpec::em(), point1(x0), tau, T, M, 11);
  const int N = 100;
  const double a = 1.0 - tau;
  const double mean = std::pow(a, N) * x0;
  double var = 0.0;
  for (int k = 0; k < N; ++k) var += tau * std::pow(a, 2 * k);
  const double m = e.samples.col(0).mean();
  const double v = (e.samples.col(0).array() - m).square().sum() / double(M - 1);
  EXPECT_LT(std::abs(m - mean), 5.0 * std::sqrt(var / M));
  EXPECT_LT(std::abs(v - var), 5.0 * var * std::sqrt(2.0 / M));
}

TEST(Simulate, ExplicitEulerDivergesOnDoubleWell) {
  const auto p = make_builtin("double_well", {});
  const auto e = simulate_ensemble(p, SchemeSpec::em(), point1(10.0), 0.5, 50.0, 64, 1);
  EXPECT_EQ(e.n_diverged(), 64u);
  for (const auto& step : e.diverged) {
    ASSERT_TRUE(step.has_value());
    EXPECT_LE(*step, 10);
  }
  EXPECT_TRUE(e.finite_samples().rows() == 0);
  const auto t = simulate_ensemble(p, SchemeSpec::tem(3.0), point1(10.0), 0.5, 50.0, 64, 1);
  EXPECT_EQ(t.n_diverged(), 0u);
}

TEST(Coupled, IdentityRefinementGivesIdenticalEnsembles) {
  const auto p = make_builtin("double_well", {});
  const auto s = SchemeSpec::tem(3.0);
  const auto [c, f] = simulate_coupled(p, s, s, point1(0.5), 0.01, 1.0, 500, 1, 9);
  EXPECT_TRUE(same(c, f));
  const auto single = simulate_ensemble(p, s, point1(0.5), 0.01, 1.0, 500, 9);
  EXPECT_TRUE(same(c, single));
}

TEST(Coupled, DeterministicProblemHasClosedFormGap) {
  // dX = −X dt with σ ≡ 0: Euler gives (1−τ)^N x0 on each grid.
  ProblemCallables pc;
  pc.drift = [](const Vec& x) { return Vec(-x); };
  pc.diffusion = [](const Vec&) { return Mat(Mat::Zero(1, 1)); };
  AssumptionConstants k;
  k.L3 = 0.1;
  k.L2 = 1.0;
  const auto p = make_problem("decay", pc, 1.5, k);
  const auto s = SchemeSpec::em();
  const auto [c, f] = simulate_coupled(p, s, s, point1(1.0), 0.1, 1.0, 4, 4, 3);
  EXPECT_NEAR(c.samples(0, 0), std::pow(0.9, 10), 1e-14);
  EXPECT_NEAR(f.samples(0, 0), std::pow(0.975, 40), 1e-14);
}

TEST(Coupled, CoarseAndFineAreStronglyCorrelated) {
  const auto p = ou();
  const auto s = SchemeSpec::tem(1.5);
  const auto [c, f] = simulate_coupled(p, s, s, point1(0.0), 1.0 / 16, 1.0, 4000, 8, 5);
  const auto x = c.samples.col(0).array() - c.samples.col(0).mean();
  const auto y = f.samples.col(0).array() - f.samples.col(0).mean();
  const double rho = (x * y).sum() / std::sqrt(x.square().sum() * y.square().sum());
  EXPECT_GT(rho, 0.99);
}

TEST(Coupled, RejectsBadRefinement) {
  const auto p = ou();
  const auto s = SchemeSpec::em();
  EXPECT_THROW(simulate_coupled(p, s, s, point1(0.0), 0.1, 1.0, 10, 3, 1), Error);
}

TEST(Levels, SnapshotsMatchSeparateRuns) {
  const auto p = ou();
  const auto s = SchemeSpec::tem(1.5);
  NoisePlan plan{21, 1, 0.01, 1, 100};
  const auto res = simulate_levels(p, {LevelSpec{s, 1}}, point1(1.0), plan, 300, {50, 100});
  const auto half = simulate_ensemble(p, s, point1(1.0), 0.01, 0.5, 300, 21);
  const auto full = simulate_ensemble(p, s, point1(1.0), 0.01, 1.0, 300, 21);
  EXPECT_TRUE(same(res[0][0], half));
  EXPECT_TRUE(same(res[0][1], full));
}

TEST(Levels, ObserverSeesEveryStep) {
  const auto p = ou();
  const auto s = SchemeSpec::em();
  NoisePlan plan{1, 1, 0.01, 4, 40};
  std::vector<int> seen(2, 0);
  SimulationOptions opt;
  opt.observer = [&](const StepEvent& ev) { ++seen[ev.level]; };
  simulate_levels(p, {LevelSpec{s, 4}, LevelSpec{s, 1}}, point1(0.0), plan, 300, {40}, opt);
  // Two chunks, step 0 included.
  EXPECT_EQ(seen[0], 2 * 11);
  EXPECT_EQ(seen[1], 2 * 41);
}

TEST(Levels, TrajectoryOffsetSelectsOtherStreams) {
  const auto p = ou();
  const auto s = SchemeSpec::em();
  SimulationOptions opt;
  opt.trajectory_offset = 100;
  const auto a = simulate_ensemble(p, s, point1(0.0), 0.1, 1.0, 200, 3);
  const auto b = simulate_ensemble(p, s, point1(0.0), 0.1, 1.0, 100, 3, opt);
  EXPECT_TRUE((a.samples.bottomRows(100).array() == b.samples.array()).all());
}
