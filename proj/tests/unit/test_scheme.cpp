#include "memsde/error.hpp"
#include "memsde/noise.hpp"
#include "memsde/problem.hpp"
#include "memsde/scheme.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include <cmath>

using namespace memsde;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

// (1 + τ r^{4(γ−1)})^{1/4} with r² given, in 50-digit arithmetic.
double denominator_oracle(double norm_sq, double tau, double gamma) {
  const Big r2(norm_sq);
  const Big inner = Big(1) + Big(tau) * boost::multiprecision::pow(r2, Big(2) * (Big(gamma) - 1));
  return static_cast<double>(boost::multiprecision::pow(inner, Big(0.25)));
}

SdeProblem double_well() { return make_builtin("double_well", {{"c", 0.25}, {"lambda0", 0.5}}); }

}  // namespace

TEST(Taming, DenominatorMatchesHighPrecision) {
  CounterStream g(17, 0, Purpose::Sampling);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double gamma = 1.0 + 3.0 * g.uniform();
    const double tau = std::pow(10.0, -6.0 * g.uniform());
    const double r = std::pow(10.0, 8.0 * g.uniform() - 4.0);
    const double got = taming_denominator(r * r, tau, gamma);
    const double want = denominator_oracle(r * r, tau, gamma);
    worst = std::max(worst, std::abs(got - want) / want);
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(Taming, IntegerExponentsMatchHighPrecision) {
  CounterStream g(18, 0, Purpose::Sampling);
  for (double gamma : {2.0, 3.0}) {
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double tau = std::pow(10.0, -6.0 * g.uniform());
      const double r = std::pow(10.0, 6.0 * g.uniform() - 3.0);
      const double want = denominator_oracle(r * r, tau, gamma);
      worst = std::max(worst, std::abs(taming_denominator(r * r, tau, gamma) - want) / want);
    }
    EXPECT_LT(worst, 1e-12) << gamma;
  }
}

TEST(Taming, DoubleWellExample) {
  const auto p = double_well();
  // 3.56^{1/4} = 1.3736070...; the rounded values −4.3673 and 0.81379 agree to 2e-4.
  const double den = denominator_oracle(4.0, 0.01, 3.0);
  EXPECT_NEAR(den, 1.373607013, 1e-9);
  EXPECT_NEAR(tame_drift(p, v1(2.0), 0.01)(0), -6.0 / den, 1e-13);
  EXPECT_NEAR(tame_drift(p, v1(2.0), 0.01)(0), -4.3673, 2e-4 * 4.3673);
  EXPECT_NEAR(tame_diffusion(p, v1(2.0), 0.01)(0, 0), std::sqrt(1.25) / den, 1e-13);
  EXPECT_NEAR(tame_diffusion(p, v1(2.0), 0.01)(0, 0), 0.81379, 2e-4 * 0.81379);
}

TEST(Taming, ZeroAndBoundedness) {
  const auto p = double_well();
  EXPECT_EQ(tame_drift(p, v1(0.0), 0.01)(0), p.drift(v1(0.0))(0));
  EXPECT_EQ(tame_diffusion(p, v1(0.0), 0.01)(0, 0), 0.5);
  for (double x : {-50.0, -3.0, 0.5, 7.0, 1e3}) EXPECT_LE(std::abs(tame_drift(p, v1(x), 0.01)(0)), std::abs(p.drift(v1(x))(0)));
}

TEST(Taming, LargeStatesStayFinite) {
  EXPECT_TRUE(std::isfinite(taming_denominator(1e300, 0.01, 3.0)));
  const auto p = double_well();
  const Vec b = tame_drift(p, v1(1e80), 0.01);
  EXPECT_TRUE(std::isfinite(b(0)));
  // |x|³/(τ^{1/4}|x|²) = |x|/τ^{1/4}
  EXPECT_NEAR(b(0) / (-1e80 / std::pow(0.01, 0.25)), 1.0, 1e-12);
}

TEST(Projection, Examples) {
  Vec x(2);
  x << 20.0, 0.0;
  const Vec y = project(x, 1e-4, 2.0);
  EXPECT_NEAR(projection_radius(1e-4, 2.0), 10.0, 1e-12);
  EXPECT_NEAR(y(0), 10.0, 1e-12);
  EXPECT_EQ(y(1), 0.0);
  EXPECT_EQ(project(Vec::Zero(3), 1e-4, 2.0).norm(), 0.0);
  Vec z(2);
  z << 3.0, -4.0;
  EXPECT_TRUE((project(z, 1e-4, 2.0).array() == z.array()).all());
}

TEST(Projection, NeverExceedsRadius) {
  CounterStream g(3, 0, Purpose::Sampling);
  for (int i = 0; i < 2000; ++i) {
    Vec x(3);
    for (int k = 0; k < 3; ++k) x(k) = (g.uniform() - 0.5) * std::pow(10.0, 6.0 * g.uniform());
    const double tau = std::pow(10.0, -4.0 * g.uniform());
    const double gamma = 1.0 + 2.0 * g.uniform();
    ASSERT_LE(norm(project(x, tau, gamma)), projection_radius(tau, gamma));
  }
}

TEST(MemStep, EulerOnOrnsteinUhlenbeck) {
  const auto p = make_builtin("ornstein_uhlenbeck", {{"theta", 1.0}, {"sigma", 1.0}});
  const auto s = SchemeSpec::em();
  const auto next = mem_step(p, s, StepState::at(v1(1.0), 0, 0.1), v1(0.0), 0.1);
  EXPECT_DOUBLE_EQ(next.y(0), 0.9);
  EXPECT_EQ(next.n, 1);
  EXPECT_DOUBLE_EQ(next.t, 0.1);
}

TEST(MemStep, TamedDoubleWellExample) {
  const auto p = double_well();
  const auto s = SchemeSpec::tem(3.0);
  const auto next = mem_step(p, s, StepState::at(v1(2.0), 0, 0.01), v1(0.05), 0.01);
  const double den = denominator_oracle(4.0, 0.01, 3.0);
  EXPECT_NEAR(next.y(0), 2.0 - 6.0 / den * 0.01 + std::sqrt(1.25) / den * 0.05, 1e-14);
  EXPECT_NEAR(next.y(0), 1.99702, 1e-5);
}

TEST(MemStep, ZeroCoefficientsApplyModificationOnly) {
  ProblemCallables c;
  c.d = 2;
  c.m = 2;
  c.drift = [](const Vec&) { return Vec(Vec::Zero(2)); };
  c.diffusion = [](const Vec&) { return Mat(Mat::Zero(2, 2)); };
  AssumptionConstants k;
  k.L3 = 1.0;
  const auto p = make_problem("zero", c, 2.0, k);
  Vec y(2);
  y << 300.0, -400.0;
  Vec dw(2);
  dw << 0.3, -0.2;
  const auto pem = mem_step(p, SchemeSpec::pem(2.0), StepState::at(y, 0, 0.01), dw, 0.01);
  EXPECT_TRUE(pem.y.isApprox(project(y, 0.01, 2.0), 1e-15));
  const auto tem = mem_step(p, SchemeSpec::tem(2.0), StepState::at(y, 0, 0.01), dw, 0.01);
  EXPECT_TRUE((tem.y.array() == y.array()).all());
}

TEST(MemStep, BatchedAdvanceMatchesSingleSteps) {
  const auto p = make_builtin("double_well", {{"d", 2}});
  CounterStream g(5, 0, Purpose::Sampling);
  for (auto kind : {SchemeKind::EM, SchemeKind::TEM, SchemeKind::PEM}) {
    const auto s = SchemeSpec::for_problem(kind, p);
    const std::size_t n = 300;
    std::vector<double> ys(n * 2), ws(n * 2);
    for (auto& v : ys) v = 6.0 * (g.uniform() - 0.5);
    for (auto& v : ws) v = 0.1 * g.normal();
    std::vector<double> batch = ys;
    StepWorkspace scratch;
    s.advance(p, 0.01, 0.01, n, batch.data(), ws.data(), scratch);
    for (std::size_t k = 0; k < n; ++k) {
      const Vec y = Eigen::Map<const Vec>(ys.data() + 2 * k, 2);
      const Vec w = Eigen::Map<const Vec>(ws.data() + 2 * k, 2);
      const auto next = mem_step(p, s, StepState::at(y, 0, 0.01), w, 0.01);
      for (std::size_t i = 0; i < 2; ++i)
        ASSERT_NEAR(batch[2 * k + i], next.y(static_cast<Eigen::Index>(i)), 1e-13 * (1.0 + std::abs(next.y(0))))
            << to_string(kind);
    }
  }
}

TEST(MemStep, ProjectedStepIsBoundedByIncrement) {
  const auto p = double_well();
  const auto s = SchemeSpec::pem(3.0);
  const double tau = 0.1, R = projection_radius(tau, 3.0);
  for (double y : {-1e6, -10.0, 0.3, 4.0, 1e9}) {
    for (double dw : {-1.0, 0.0, 0.7}) {
      const auto next = mem_step(p, s, StepState::at(v1(y), 0, tau), v1(dw), tau);
      const double b_max = R - R * R * R, s_max = std::sqrt(0.25 + 0.25 * R * R);
      ASSERT_LE(std::abs(next.y(0)), R + tau * std::abs(b_max) + s_max * std::abs(dw) + 1e-12);
    }
  }
}

TEST(Interpolation, ReproducesStepAtEndpoint) {
  const auto p = make_builtin("ginzburg_landau_3d", {});
  Vec y(3), dw(3);
  y << 1.0, -2.0, 0.5;
  dw << 0.1, 0.05, -0.2;
  for (auto kind : {SchemeKind::EM, SchemeKind::TEM, SchemeKind::PEM}) {
    const auto s = SchemeSpec::for_problem(kind, p);
    const auto st = StepState::at(y, 4, 0.01);
    const auto next = mem_step(p, s, st, dw, 0.01);
    const Vec end = interpolate_step(p, s, st, dw, 0.01, 0.01);
    EXPECT_TRUE((end.array() == next.y.array()).all()) << to_string(kind);
    const Vec start = interpolate_step(p, s, st, Vec::Zero(3), 0.0, 0.01);
    EXPECT_TRUE(start.isApprox(s.modification(y, 0.01)));
  }
}

TEST(Interpolation, RejectsTimesOutsideStep) {
  const auto p = double_well();
  const auto s = SchemeSpec::tem(3.0);
  const auto st = StepState::at(v1(1.0), 0, 0.01);
  try {
    interpolate_step(p, s, st, v1(0.0), 0.02, 0.01);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::OutOfStep);
  }
}

TEST(Exponents, DeclaredValues) {
  const auto t = SchemeSpec::tem(3.0);
  EXPECT_EQ(t.alpha1(), 11.0);
  EXPECT_EQ(t.alpha2(), 2.0);
  EXPECT_EQ(t.alpha3(), 0.0);
  const auto q = SchemeSpec::pem(3.0);
  EXPECT_EQ(q.alpha1(), 1.0);
  EXPECT_EQ(q.alpha2(), 13.0);
  EXPECT_EQ(q.alpha3(), 1.0);
  const auto e = SchemeSpec::em();
  EXPECT_EQ(e.alpha1(), 1.0);
  EXPECT_EQ(e.alpha2(), 2.0);
  EXPECT_EQ(e.alpha3(), 1.0);
  EXPECT_EQ(parse_scheme_kind("pem"), SchemeKind::PEM);
  EXPECT_FALSE(parse_scheme_kind("rk4").has_value());
}
