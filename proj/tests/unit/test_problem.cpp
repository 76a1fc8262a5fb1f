#include "memsde/checks.hpp"
#include "memsde/error.hpp"
#include "memsde/problem.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace memsde;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no memsde::Error thrown";
  return Errc::InvalidArgument;
}

Vec v1(double x) { return Vec::Constant(1, x); }

}  // namespace

TEST(Builtins, DoubleWellCoefficients) {
  const auto p = make_builtin("double_well", {{"d", 1}, {"c", 0.25}, {"lambda0", 0.5}});
  EXPECT_EQ(p.d(), 1u);
  EXPECT_EQ(p.gamma(), 3.0);
  EXPECT_DOUBLE_EQ(p.drift(v1(2.0))(0), -6.0);
  EXPECT_DOUBLE_EQ(p.diffusion(v1(0.0))(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p.diffusion(v1(2.0))(0, 0), std::sqrt(0.25 + 0.25 * 4.0));
}

TEST(Builtins, OrnsteinUhlenbeckCoefficients) {
  const auto p = make_builtin("ornstein_uhlenbeck", {{"theta", 1.0}, {"sigma", 1.0}});
  EXPECT_DOUBLE_EQ(p.drift(v1(2.0))(0), -2.0);
  EXPECT_DOUBLE_EQ(p.diffusion(v1(3.0))(0, 0), 1.0);
  EXPECT_EQ(p.gamma(), 1.5);
  ASSERT_TRUE(p.stationary_law().has_value());
  EXPECT_DOUBLE_EQ(p.stationary_law()->sd(0), std::sqrt(0.5));
}

TEST(Builtins, GinzburgLandauRadialDrift) {
  const auto p = make_builtin("ginzburg_landau_3d", {});
  Vec x(3);
  x << 1.0, 2.0, 2.0;
  const Vec b = p.drift(x);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(b(i), (1.0 - 9.0) * x(i));
  EXPECT_EQ(p.m(), 3u);
}

TEST(Builtins, MultiDimensionalDoubleWellIsSeparable) {
  const auto p = make_builtin("double_well", {{"d", 3}});
  Vec x(3);
  x << 0.5, -1.5, 2.0;
  const Vec b = p.drift(x);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(b(i), x(i) - x(i) * x(i) * x(i));
  const Mat s = p.diffusion(x);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(s(2, 2), std::sqrt(0.25 + 0.25 * 4.0));
}

TEST(Builtins, Errors) {
  EXPECT_EQ(code_of([] { make_builtin("van_der_pol", {}); }), Errc::UnknownProblem);
  EXPECT_EQ(code_of([] { make_builtin("ornstein_uhlenbeck", {{"theta", 1.0}}); }), Errc::MissingParam);
  EXPECT_EQ(code_of([] { make_builtin("double_well", {{"c", 0.25}}, {{"K9", 1.0}}); }), Errc::ConfigError);
}

TEST(Builtins, ShippedConstantsPassSampledChecks) {
  for (const auto* name : {"double_well", "ginzburg_landau_3d"}) {
    const auto p = make_builtin(name, {});
    EXPECT_TRUE(check_coercivity(p, 5000, 10.0, 1).passed()) << name;
    EXPECT_TRUE(check_monotonicity(p, 5000, 10.0, 1).passed()) << name;
  }
  const auto ou = make_builtin("ornstein_uhlenbeck", {{"theta", 1.0}, {"sigma", 1.0}});
  EXPECT_TRUE(check_coercivity(ou, 5000, 10.0, 1).passed());
  EXPECT_TRUE(check_monotonicity(ou, 5000, 10.0, 1).passed());
  EXPECT_TRUE(check_ellipticity(ou, 5000, 10.0, 1).passed());
}

TEST(Builtins, DoubleWellWithSmallL2IsViolated) {
  // Margin L2 − L3 x⁴ − x b(x) − 3σ(x)² = 1.25 − 1.75x² + 0.5x⁴ at L2 = 2, negative near x² = 1.75.
  const double x2 = 1.75;
  EXPECT_LT(1.25 - 1.75 * x2 + 0.5 * x2 * x2, 0.0);
  EXPECT_EQ(code_of([] { make_builtin("double_well", {}, {{"L2", 2.0}}); }), Errc::CoercivityViolated);
  auto c = default_constants(BuiltinProblem::DoubleWell, {});
  c.L2 = 2.0;
  const auto p = make_builtin("double_well", {}).with_constants(c);
  const auto r = check_coercivity(p, 5000, 10.0, 3);
  EXPECT_GT(r.n_violations, 0u);
  EXPECT_LT(r.worst_margin, 0.0);
}

TEST(Builtins, OrnsteinUhlenbeckWithLargeL3IsViolated) {
  EXPECT_EQ(code_of([] {
              make_builtin("ornstein_uhlenbeck", {{"theta", 1.0}, {"sigma", 1.0}, {"gamma", 1.5}}, {{"L3", 10.0}});
            }),
            Errc::CoercivityViolated);
}

TEST(Builtins, DoubleWellEllipticityFailsAtLargeRadius) {
  // λ0⁻² = 4 ≥ 0.25 + 0.25x² only for |x| ≤ √15.
  const auto p = make_builtin("double_well", {});
  EXPECT_TRUE(check_ellipticity(p, 2000, 3.8, 1).passed());
  EXPECT_FALSE(check_ellipticity(p, 2000, 10.0, 1).passed());
}

TEST(Builtins, JacobiansMatchFiniteDifferences) {
  for (const auto* name : {"double_well", "ginzburg_landau_3d"}) {
    const auto p = make_builtin(name, {});
    ASSERT_TRUE(p.has_jacobians());
    EXPECT_LT(drift_jacobian_error(p, 500, 3.0, 2), 1e-4) << name;
  }
  // Diffusion Jacobian of double_well: d/dx sqrt(λ0² + c x²) = c x / sqrt(λ0² + c x²).
  const auto p = make_builtin("double_well", {});
  const auto J = p.diffusion_jacobians(v1(1.5));
  ASSERT_EQ(J.size(), 1u);
  EXPECT_NEAR(J[0](0, 0), 0.25 * 1.5 / std::sqrt(0.25 + 0.25 * 2.25), 1e-14);
}

TEST(Builtins, EvaluationIsDeterministic) {
  const auto a = make_builtin("ginzburg_landau_3d", {});
  const auto b = make_builtin("ginzburg_landau_3d", {});
  Vec x(3);
  x << 0.3, -0.7, 1.9;
  EXPECT_TRUE((a.drift(x).array() == b.drift(x).array()).all());
  EXPECT_TRUE((a.diffusion(x).array() == b.diffusion(x).array()).all());
}

TEST(CustomProblem, CallablesAreUsed) {
  ProblemCallables c;
  c.d = 2;
  c.m = 1;
  c.drift = [](const Vec& x) { return Vec(-x); };
  c.diffusion = [](const Vec&) {
    Mat s(2, 1);
    s << 1.0, 2.0;
    return s;
  };
  AssumptionConstants k;
  k.L3 = 0.1;
  k.L2 = 10.0;
  const auto p = make_problem("linear", c, 1.5, k);
  Vec x(2);
  x << 1.0, -3.0;
  EXPECT_DOUBLE_EQ(p.drift(x)(1), 3.0);
  EXPECT_DOUBLE_EQ(p.diffusion(x)(1, 0), 2.0);
  EXPECT_FALSE(p.has_jacobians());
}

TEST(Constants, Validation) {
  AssumptionConstants c;
  c.L3 = 1.0;
  EXPECT_NO_THROW(c.validate());
  EXPECT_DOUBLE_EQ(c.tau_max(), 1.0);
  c.K4 = 4.0;
  EXPECT_DOUBLE_EQ(c.tau_max(), 0.25);
  c.lambda0 = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c.lambda0 = 0.5;
  c.L3 = 0.0;
  EXPECT_THROW(c.validate(), Error);
}
