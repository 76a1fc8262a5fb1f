#pragma once

#include "memsde/simulate.hpp"
#include "memsde/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memsde {

/// Equally weighted point cloud, one point per row.
struct EmpiricalMeasure {
  SampleMatrix points;
  std::string provenance;

  /// Throws InvalidArgument on an empty cloud or a non-finite row.
  explicit EmpiricalMeasure(SampleMatrix pts, std::string provenance = {});
  /// Finite rows of an ensemble; EmptyAfterExclusion if none remain.
  static EmpiricalMeasure from_ensemble(const Ensemble& e);

  std::size_t size() const noexcept { return static_cast<std::size_t>(points.rows()); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(points.cols()); }
};

/// Sum by recursive halving.
double pairwise_sum(const double* x, std::size_t n);

/// Exact W1 between two equal-size 1D empirical measures via order statistics.
double wasserstein1_sorted(const EmpiricalMeasure& a, const EmpiricalMeasure& b);
/// Exact W1 by optimal assignment under Euclidean cost; n ≤ 512.
double wasserstein1_matching(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

struct SlicedW1 {
  double value = 0.0;
  /// Standard error over directions (0 in one dimension).
  double direction_se = 0.0;
};

/// Mean over seeded uniform unit directions of the 1D W1 of the projections.
SlicedW1 wasserstein1_sliced_detail(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                    std::size_t n_directions, std::uint64_t seed);
double wasserstein1_sliced(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                           std::size_t n_directions, std::uint64_t seed);

enum class W1Estimator { Auto, Sorted, Matching, Sliced };
std::string_view to_string(W1Estimator e);
std::optional<W1Estimator> parse_w1_estimator(std::string_view name);

/// Auto: sorted for d = 1, matching for n ≤ 512, sliced with 64 directions otherwise.
double wasserstein1(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                    W1Estimator estimator = W1Estimator::Auto, std::uint64_t seed = 0);

/// Exact W1 between N(mean1, sd1²) and N(mean2, sd2²) by quadrature over the quantile coupling.
double gaussian_w1_1d(double mean1, double sd1, double mean2, double sd2);

/// Exact W1 between a 1D empirical measure and N(mean, sd²).
double w1_to_gaussian_1d(const EmpiricalMeasure& a, double mean, double sd);

/// Standard-error scales for the W1 estimates above, from the pointwise variance of the
/// empirical CDF difference integrated over x. In d > 1 they are averaged over the same
/// sliced directions.
///   paired: rows of a and b come from the same trajectories (common noise);
///   unpaired: independent samples;
///   to_law: sampling error of one cloud against a fixed law.
double w1_se_paired(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                    std::size_t n_directions = 64, std::uint64_t seed = 0);
double w1_se_unpaired(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                      std::size_t n_directions = 64, std::uint64_t seed = 0);
double w1_se_to_law(const EmpiricalMeasure& a);

/// n rows drawn without replacement, kept in their original order.
EmpiricalMeasure subsample(const EmpiricalMeasure& a, std::size_t n, std::uint64_t seed);

struct MomentReport {
  std::vector<int> orders;
  std::vector<double> values;
  std::vector<double> std_errors;
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;
};

inline constexpr std::size_t kBootstrapResamples = 200;

/// E|Y|^q for each even order q, with bootstrap standard errors.
MomentReport moments(const EmpiricalMeasure& a, const std::vector<int>& orders, std::uint64_t seed);
/// Diverged trajectories are excluded and counted; orders must not exceed 2·p_star.
MomentReport moments(const Ensemble& e, const std::vector<int>& orders, std::uint64_t seed,
                     double p_star = 2.0);

}  // namespace memsde
