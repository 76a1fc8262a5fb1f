#pragma once

#include "memsde/checks.hpp"
#include "memsde/measure.hpp"
#include "memsde/problem.hpp"
#include "memsde/scheme.hpp"
#include "memsde/simulate.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace memsde {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------------------
// Rate fitting

enum class RateModel { LogTau, LogTauLogCorrected };
std::string_view to_string(RateModel model);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// Root mean square of the regression residuals.
  double residual = 0.0;
};

/// OLS of ln(error) against ln τ or ln(τ|ln τ|). Needs ≥ 3 pairs, positive errors and
/// τ in (0, 1); DegenerateInput otherwise.
RateFit fit_log_rate(const std::vector<double>& taus, const std::vector<double>& errors, RateModel model);

/// Plain least-squares line y = intercept + slope·x with RMS residual.
RateFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Common inputs of every study.
struct StudyContext {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

// ---------------------------------------------------------------------------------------
// Weak / W1 error against a fine reference

struct WeakErrorParams {
  double T = 1.0;
  /// Descending; every τ must be a power-of-two multiple of min(taus)/ref_refinement.
  std::vector<double> taus;
  std::size_t M = 1000;
  std::int64_t ref_refinement = 64;
  W1Estimator estimator = W1Estimator::Auto;
  /// Optional exact law of X_T (d = 1) for an additional comparison.
  std::optional<GaussianLaw> exact_law;
};

struct ConvergenceReport {
  std::string problem;
  std::string scheme;
  double T = 0.0;
  std::size_t M = 0;
  double tau_ref = 0.0;
  std::vector<double> taus;
  std::vector<double> errors;
  std::vector<double> std_errors;
  std::vector<std::size_t> n_effective;
  std::vector<double> diverged_fraction;
  /// W1 to the exact law and its sampling SE, when one was supplied.
  std::vector<double> exact_errors;
  std::vector<double> exact_std_errors;
  std::optional<RateFit> fit_logtau;
  std::optional<RateFit> fit_loglog;
  /// False when some error is zero, so that neither model can be fitted.
  bool slopes_defined = false;
  std::string better_model;
  /// error(τ1) ≤ error(τ2) + 3(SE1 + SE2) for every τ1 < τ2.
  bool monotone = false;
};

ConvergenceReport weak_error_study(const SdeProblem& p, const SchemeSpec& s, const InitialCondition& x0,
                                   const WeakErrorParams& params, const StudyContext& ctx);

// ---------------------------------------------------------------------------------------
// Invariant measure

struct InvariantParams {
  std::vector<double> taus;
  /// Horizon in steps of min(taus).
  std::int64_t N_long = 0;
  std::size_t M = 1000;
  std::int64_t ref_refinement = 16;
  W1Estimator estimator = W1Estimator::Auto;
  /// Length in time units of the single-trajectory time average; 0 disables it.
  double time_average_T = 0.0;
};

struct TimeAverageCheck {
  double ensemble_mean = 0.0;
  double ensemble_se = 0.0;
  double time_mean = 0.0;
  double time_se = 0.0;
  bool agree = false;
};

struct ErgodicityReport {
  std::string problem;
  std::string scheme;
  std::size_t M = 0;
  double T_long = 0.0;
  double tau_ref = 0.0;
  std::int64_t burn_in_steps = 0;
  std::vector<double> taus;
  std::vector<double> errors;
  std::vector<double> std_errors;
  std::vector<std::size_t> n_effective;
  std::vector<double> burn_in_w1;
  std::vector<double> burn_in_se;
  std::vector<TimeAverageCheck> time_average;
  /// Exact stationary law comparison (d = 1 with a known law).
  std::vector<double> exact_errors;
  std::vector<double> exact_std_errors;
  std::optional<double> exact_bias_bound;
  std::optional<RateFit> fit_logtau;
  std::optional<RateFit> fit_loglog;
  /// error strictly smaller at every smaller τ.
  bool strictly_decreasing = false;
  /// Bootstrap SE of errors[i] − errors[i+1], resampling trajectories jointly across levels.
  std::vector<double> decrease_std_errors;
  /// Every consecutive decrease exceeds 3 decrease_std_errors.
  bool decreasing_beyond_noise = false;
};

ErgodicityReport invariant_measure_study(const SdeProblem& p, const SchemeSpec& s, const InitialCondition& x0,
                                         const InvariantParams& params, const StudyContext& ctx);

// ---------------------------------------------------------------------------------------
// Moment stability

struct MomentParams {
  double tau = 0.1;
  std::int64_t N = 1000;
  std::size_t M = 1000;
  std::vector<int> orders{2, 4};
};

struct MomentSeries {
  int order = 2;
  /// Empirical E|Y_n|^order over finite trajectories, n = 0..N.
  std::vector<double> values;
  double sup = 0.0;
  double initial = 0.0;
  /// Constant of the one-step recursion, fitted from the stationary tail.
  double c_hat = 0.0;
  double threshold = 0.0;
  std::size_t n_checked = 0;
  std::size_t n_violations = 0;
  /// Largest 99% bootstrap upper bound of m_{n+1} − (1 − K4τ/8)m_n − ĉτ over checked n.
  double worst_excess = 0.0;
};

struct MomentStabilityReport {
  std::string problem;
  std::string scheme;
  double tau = 0.0;
  double tau_max = 0.0;
  std::int64_t N = 0;
  std::size_t M = 0;
  std::size_t n_diverged = 0;
  double diverged_fraction = 0.0;
  std::vector<MomentSeries> series;
  /// Terminal moments with bootstrap SEs.
  MomentReport terminal;
};

MomentStabilityReport moment_stability_study(const SdeProblem& p, const SchemeSpec& s, const InitialCondition& x0,
                                             const MomentParams& params, const StudyContext& ctx);

// ---------------------------------------------------------------------------------------
// EM blow-up

struct BlowupParams {
  double tau = 0.5;
  std::int64_t N = 100;
  std::size_t M = 1000;
};

struct BlowupScheme {
  std::string scheme;
  double diverged_fraction = 0.0;
  std::vector<double> second_moment;  // n = 0..N, finite trajectories
  std::vector<double> fourth_moment;
  double max_norm = 0.0;
};

struct BlowupReport {
  std::string problem;
  double tau = 0.0;
  std::int64_t N = 0;
  std::size_t M = 0;
  std::vector<BlowupScheme> schemes;  // em, tem, pem
  bool em_exceeds_modified = false;
  double pem_radius = 0.0;
  /// Radius plus a one-step increment bound with |ΔW_j| ≤ 10 sqrt(τ).
  double pem_step_bound = 0.0;
  bool pem_within_bound = false;
};

BlowupReport blowup_study(const SdeProblem& p, const InitialCondition& x0, const BlowupParams& params,
                          const StudyContext& ctx);

// ---------------------------------------------------------------------------------------
// W1 contraction between two initial points

struct ContractionParams {
  Vec x0_a;
  Vec x0_b;
  double tau = 0.01;
  std::vector<double> T_list;
  std::size_t M = 1000;
};

struct ContractionReport {
  std::string problem;
  std::string scheme;
  double tau = 0.0;
  std::size_t M = 0;
  std::vector<double> T_list;
  std::vector<double> w1;
  std::vector<double> std_errors;
  std::vector<double> baseline_w1;
  std::vector<double> baseline_se;
  /// −ln(W_{i+1}/W_i)/(T_{i+1} − T_i)
  std::vector<double> lag_rates;
  std::optional<double> lambda_hat;
  std::optional<RateFit> decay_fit;
  bool strictly_decreasing = false;
};

ContractionReport contraction_study(const SdeProblem& p, const SchemeSpec& s, const ContractionParams& params,
                                    const StudyContext& ctx);

// ---------------------------------------------------------------------------------------
// Bismut–Elworthy–Li gradient

using TestFunction = std::function<double(const Vec&)>;

struct GradientEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n_used = 0;
};

struct BelParams {
  double t = 1.0;
  Vec x;
  Vec v;
  double tau = 1.0 / 256.0;
  std::size_t M = 1000;
};

/// (1/t)·mean of ∫⟨σ⁻¹(X)η, dW⟩·φ(X_t) along TEM paths.
GradientEstimate bel_gradient(const SdeProblem& p, const TestFunction& phi, const BelParams& params,
                              const StudyContext& ctx);

/// Central difference (φ(X_t^{x+hv}) − φ(X_t^{x−hv}))/2h under common noise.
GradientEstimate finite_difference_gradient(const SdeProblem& p, const SchemeSpec& s, const TestFunction& phi,
                                            const BelParams& params, double h, const StudyContext& ctx);

// ---------------------------------------------------------------------------------------
// JSON views used by report.json

Json to_json(const RateFit& f);
Json to_json(const SampledCheckReport& r);
Json to_json(const MomentReport& r);
Json to_json(const ConvergenceReport& r);
Json to_json(const ErgodicityReport& r);
Json to_json(const MomentStabilityReport& r);
Json to_json(const BlowupReport& r);
Json to_json(const ContractionReport& r);
Json to_json(const GradientEstimate& g);

}  // namespace memsde
