#pragma once

#include "memsde/problem.hpp"
#include "memsde/scheme.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memsde {

enum class AssumptionId { A1_mon, A1_coe, A3_ellipticity, A4, A5_mon_star, A5_s_tau };

std::string_view to_string(AssumptionId id);

/// Outcome of a sampled falsification attempt.
///
/// For inequalities with declared constants the margin at a point is RHS - LHS and
/// `worst_margin` is the minimum over all points. For the A4 bounds, whose constant C is
/// existential, `fitted_constant` holds the largest observed ratio and the margin tracks
/// growth of that ratio with |x| (see check_scheme_conditions).
struct SampledCheckReport {
  AssumptionId assumption_id = AssumptionId::A1_mon;
  std::string inequality;
  std::size_t n_points = 0;
  std::size_t n_violations = 0;
  double worst_margin = 0.0;
  double sampled_radius = 0.0;
  std::optional<double> fitted_constant;
  std::optional<double> growth_slope;

  bool passed() const { return n_violations == 0; }
};

/// Seeded uniform points in the closed ball of radius `radius`, one per row.
SampleMatrix sample_ball(std::size_t d, std::size_t n, double radius, std::uint64_t seed);

/// Deterministic coarse grid: points along ±e_i and ±(1,…,1)/√d at evenly spaced radii.
SampleMatrix coarse_grid(std::size_t d, double radius, std::size_t radii = 40);

/// ⟨x−y, b(x)−b(y)⟩ + (2p⋆−1)/2 ‖σ(x)−σ(y)‖² ≤ L1 |x−y|² over sampled pairs.
SampledCheckReport check_monotonicity(const SdeProblem& p, std::size_t n_points, double radius,
                                      std::uint64_t seed);

/// ⟨x, b(x)⟩ + p⋆(2p⋆−1)/2 ‖σ(x)‖² ≤ L2 − L3 |x|^{γ+1} over sampled points.
SampledCheckReport check_coercivity(const SdeProblem& p, std::size_t n_points, double radius,
                                    std::uint64_t seed);

/// λ0⁻² I ≥ σσᵀ ≥ λ0² I. The contractivity-at-infinity part of the same assumption is not
/// checked.
SampledCheckReport check_ellipticity(const SdeProblem& p, std::size_t n_points, double radius,
                                     std::uint64_t seed);

/// Modification-map and modified-coefficient bounds, then the two scheme Lyapunov
/// inequalities, at step size tau. Requires 0 < tau < tau_max.
std::vector<SampledCheckReport> check_scheme_conditions(const SdeProblem& p, const SchemeSpec& s,
                                                        double tau, std::size_t n_points,
                                                        double radius, std::uint64_t seed);

/// Maximum relative error of the analytic drift Jacobian against central differences.
double drift_jacobian_error(const SdeProblem& p, std::size_t n_points, double radius,
                            std::uint64_t seed);

}  // namespace memsde
