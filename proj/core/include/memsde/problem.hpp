#pragma once

#include "memsde/types.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memsde {

/// Declared constants of the dissipativity, ellipticity and scheme assumptions.
/// Nothing here is discovered automatically; the sampled checks only try to falsify them.
struct AssumptionConstants {
  // monotonicity / coercivity
  double L1 = 0.0;
  double L2 = 0.0;
  double L3 = 0.0;
  double p_star = 2.0;
  // ellipticity and contractivity at infinity
  double lambda0 = 0.5;
  double K1 = 0.0;
  double K2 = 0.0;
  double r0 = 0.0;
  // scheme-level Lyapunov constants
  double K3 = 0.0;
  double K4 = 1.0;
  double K5 = 0.0;
  double K6 = 0.0;
  double alpha3 = 0.0;

  /// min{1/K4, 1}
  double tau_max() const;
  /// Throws InvalidArgument unless L3 > 0, K4 > 0, lambda0 in (0,1), alpha3 < 2 and p_star >= 1.
  void validate() const;
};

using ParamMap = std::map<std::string, double, std::less<>>;

/// Sets the named constants in `c`; unknown names raise ConfigError.
void apply_constant_overrides(AssumptionConstants& c, const ParamMap& overrides);

/// Coefficient evaluation. All buffers are caller-owned; matrices are column-major.
/// Implementations must be safe to call concurrently.
class Coefficients {
 public:
  Coefficients(std::size_t d, std::size_t m);
  virtual ~Coefficients() = default;

  std::size_t d() const noexcept { return d_; }
  std::size_t m() const noexcept { return m_; }

  virtual void drift(const double* x, double* out) const = 0;
  /// Writes the d×m matrix σ(x).
  virtual void diffusion(const double* x, double* out) const = 0;

  /// True when m == d and σ(x) is diagonal for every x.
  virtual bool diagonal_diffusion() const { return false; }
  /// Diagonal of σ(x); only meaningful when diagonal_diffusion() holds.
  virtual void diffusion_diagonal(const double* x, double* out) const;

  virtual bool has_jacobians() const { return false; }
  /// Db(x) as a d×d matrix.
  virtual void drift_jacobian(const double* x, double* out) const;
  /// Dσ_j(x) for j = 0..m-1, stored as m consecutive d×d matrices.
  virtual void diffusion_jacobians(const double* x, double* out) const;

  // Batched forms over `count` points stored back to back (stride d).
  virtual void drift_batch(std::size_t count, const double* xs, double* out) const;
  virtual void diffusion_batch(std::size_t count, const double* xs, double* out) const;
  virtual void diffusion_diagonal_batch(std::size_t count, const double* xs, double* out) const;

 private:
  std::size_t d_;
  std::size_t m_;
};

/// Diagonal-covariance Gaussian law, used for initial states and analytic stationary laws.
struct GaussianLaw {
  Vec mean;
  Vec sd;
};

/// An SDE dX = b(X)dt + σ(X)dW together with its growth exponent and declared constants.
class SdeProblem {
 public:
  SdeProblem(std::string name, std::shared_ptr<const Coefficients> coefficients, double gamma,
             AssumptionConstants constants, ParamMap params = {},
             std::optional<GaussianLaw> stationary_law = std::nullopt);

  const std::string& name() const noexcept { return name_; }
  std::size_t d() const noexcept { return coefficients_->d(); }
  std::size_t m() const noexcept { return coefficients_->m(); }
  double gamma() const noexcept { return gamma_; }
  const AssumptionConstants& constants() const noexcept { return constants_; }
  const ParamMap& params() const noexcept { return params_; }
  const Coefficients& coefficients() const noexcept { return *coefficients_; }
  /// Exact invariant law when known in closed form (Ornstein–Uhlenbeck).
  const std::optional<GaussianLaw>& stationary_law() const noexcept { return stationary_law_; }

  Vec drift(const Vec& x) const;
  Mat diffusion(const Vec& x) const;
  bool has_jacobians() const { return coefficients_->has_jacobians(); }
  Mat drift_jacobian(const Vec& x) const;
  std::vector<Mat> diffusion_jacobians(const Vec& x) const;

  /// Copy with different declared constants (no construction-time check).
  SdeProblem with_constants(const AssumptionConstants& constants) const;

 private:
  std::string name_;
  std::shared_ptr<const Coefficients> coefficients_;
  double gamma_;
  AssumptionConstants constants_;
  ParamMap params_;
  std::optional<GaussianLaw> stationary_law_;
};

/// User-supplied coefficients. Jacobians are optional.
struct ProblemCallables {
  std::size_t d = 1;
  std::size_t m = 1;
  std::function<Vec(const Vec&)> drift;
  std::function<Mat(const Vec&)> diffusion;
  std::function<Mat(const Vec&)> drift_jacobian;
  std::function<std::vector<Mat>(const Vec&)> diffusion_jacobians;
};

SdeProblem make_problem(std::string name, ProblemCallables callables, double gamma,
                        const AssumptionConstants& constants);

enum class BuiltinProblem { DoubleWell, GinzburgLandau3d, OrnsteinUhlenbeck };

std::optional<BuiltinProblem> parse_builtin(std::string_view name);
std::string_view to_string(BuiltinProblem problem);

/// Shipped constants for a built-in problem at the given parameters.
AssumptionConstants default_constants(BuiltinProblem problem, const ParamMap& params,
                                      double p_star = 2.0);

/// Built-in test problems:
///   double_well        b(x)_i = x_i - x_i^3, σ(x) = diag(sqrt(λ0² + c x_i²)), γ = 3
///   ginzburg_landau_3d b(x) = (1 - |x|²) x in R³, σ as double_well, γ = 3
///   ornstein_uhlenbeck b(x) = -θ x, σ(x) = σ I, γ declared (default 1.5)
/// `constant_overrides` replaces individual shipped constants. The declared coercivity
/// inequality is sampled after construction and CoercivityViolated is raised if it fails.
SdeProblem make_builtin(BuiltinProblem problem, const ParamMap& params,
                        const ParamMap& constant_overrides = {});
SdeProblem make_builtin(std::string_view name, const ParamMap& params,
                        const ParamMap& constant_overrides = {});

}  // namespace memsde
