#pragma once

#include "memsde/problem.hpp"
#include "memsde/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace memsde {

enum class SchemeKind { EM, TEM, PEM, CustomMEM };

std::string_view to_string(SchemeKind kind);
/// Accepts "em", "tem", "pem" and "custom".
std::optional<SchemeKind> parse_scheme_kind(std::string_view name);

/// User-defined modification map and modified coefficients for a custom scheme.
struct CustomScheme {
  std::function<Vec(const Vec& x, double tau)> modification;
  std::function<Vec(const Vec& x, double tau)> modified_drift;
  std::function<Mat(const Vec& x, double tau)> modified_diffusion;
};

/// Scratch buffers for SchemeSpec::advance; one per worker.
struct StepWorkspace {
  std::vector<double> drift;
  std::vector<double> diffusion;
  std::vector<double> factor;
};

/// One member of the modified Euler family
///   Y' = P(Y) + b_τ(P(Y)) dt + Σ_j σ_{j,τ}(P(Y)) ΔW_j
/// with its declared growth exponents (α1, α2, α3).
class SchemeSpec {
 public:
  static SchemeSpec em();
  /// Tamed Euler: P = id, coefficients divided by (1 + τ|x|^{4(γ−1)})^{1/4}.
  static SchemeSpec tem(double gamma);
  /// Projected Euler: P(x) = min{1, τ^{−1/(2γ)}/|x|} x followed by a plain Euler step.
  static SchemeSpec pem(double gamma);
  static SchemeSpec custom(CustomScheme functions, double alpha1, double alpha2, double alpha3);
  /// EM, TEM or PEM with γ taken from the problem.
  static SchemeSpec for_problem(SchemeKind kind, const SdeProblem& p);

  SchemeKind kind() const noexcept { return kind_; }
  double gamma() const noexcept { return gamma_; }
  double alpha1() const noexcept { return alpha1_; }
  double alpha2() const noexcept { return alpha2_; }
  double alpha3() const noexcept { return alpha3_; }

  SchemeSpec with_exponents(double alpha1, double alpha2, double alpha3) const;

  /// P(x).
  Vec modification(const Vec& x, double tau) const;
  /// b_τ evaluated at x (callers pass x = P(y)).
  Vec modified_drift(const SdeProblem& p, const Vec& x, double tau) const;
  /// σ_τ evaluated at x.
  Mat modified_diffusion(const SdeProblem& p, const Vec& x, double tau) const;

  /// In place, for `count` states stored back to back:
  ///   y ← P(y) + b_τ(P(y))·dt + σ_τ(P(y))·w
  /// where w holds `count` increments of length m. dt = τ is a full step.
  void advance(const SdeProblem& p, double tau, double dt, std::size_t count, double* ys,
               const double* ws, StepWorkspace& scratch) const;

 private:
  SchemeSpec(SchemeKind kind, double gamma, double alpha1, double alpha2, double alpha3);

  SchemeKind kind_;
  double gamma_;
  double alpha1_;
  double alpha2_;
  double alpha3_;
  std::shared_ptr<const CustomScheme> custom_;
};

/// Y_n, n and t_n = nτ.
struct StepState {
  Vec y;
  std::int64_t n = 0;
  double t = 0.0;

  static StepState at(Vec y, std::int64_t n, double tau) { return {std::move(y), n, static_cast<double>(n) * tau}; }
  bool finite() const;
};

/// (1 + τ |x|^{4(γ−1)})^{1/4} given |x|², computed in log space once τ|x|^{4(γ−1)} leaves
/// the double range.
double taming_denominator(double norm_sq, double tau, double gamma);

/// b(x) / (1 + τ|x|^{4(γ−1)})^{1/4}
Vec tame_drift(const SdeProblem& p, const Vec& x, double tau);
/// σ(x) / (1 + τ|x|^{4(γ−1)})^{1/4}, same scalar factor for every column.
Mat tame_diffusion(const SdeProblem& p, const Vec& x, double tau);

/// Radius τ^{−1/(2γ)} of the projection ball.
double projection_radius(double tau, double gamma);
/// min{1, τ^{−1/(2γ)}|x|⁻¹} x, with 0 ↦ 0. The result never exceeds the radius in norm.
Vec project(const Vec& x, double tau, double gamma);
void project_inplace(double* x, std::size_t d, double radius);

/// One step of the scheme. A non-finite result is returned as is; check StepState::finite().
StepState mem_step(const SdeProblem& p, const SchemeSpec& s, const StepState& state,
                   const Vec& dW, double tau);

/// Continuous interpolation inside [t_n, t_n + τ]:
///   P(Y_n) + b_τ(P(Y_n))·dt_within + σ_τ(P(Y_n))·(W_s − W_{t_n}).
/// At dt_within = τ with the full increment it reproduces mem_step bit for bit.
Vec interpolate_step(const SdeProblem& p, const SchemeSpec& s, const StepState& state,
                     const Vec& w_path_increment, double dt_within, double tau);

}  // namespace memsde
