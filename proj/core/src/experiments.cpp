#include "memsde/experiments.hpp"

#include "memsde/checks.hpp"
#include "memsde/error.hpp"
#include "memsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace memsde {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Powers of two R_i with taus[i] = R_i·tau_ref.
std::vector<std::int64_t> refinements(const std::vector<double>& taus, double tau_ref) {
  std::vector<std::int64_t> out;
  for (double t : taus) {
    const double q = t / tau_ref;
    const auto r = static_cast<std::int64_t>(std::llround(q));
    if (r < 1 || (r & (r - 1)) != 0 || std::abs(q - static_cast<double>(r)) > 1e-9 * q)
      fail(Errc::ConfigError, "every tau must be a power-of-two multiple of the reference step");
    out.push_back(r);
  }
  return out;
}

void validate_taus(const std::vector<double>& taus, const SdeProblem& p, std::size_t min_count) {
  require(taus.size() >= min_count, Errc::ConfigError, "too few step sizes");
  const double tmax = p.constants().tau_max();
  for (std::size_t i = 0; i < taus.size(); ++i) {
    require(taus[i] > 0.0 && taus[i] < tmax, Errc::ConfigError, "every tau must lie in (0, tau_max)");
    if (i > 0) require(taus[i] < taus[i - 1], Errc::ConfigError, "taus must be strictly descending");
  }
}

void require_power_of_two(std::int64_t r, const char* what) {
  require(r >= 1 && (r & (r - 1)) == 0, Errc::ConfigError, std::string(what) + " must be a power of two");
}

// Rows finite in both ensembles.
std::pair<EmpiricalMeasure, EmpiricalMeasure> common_finite(const Ensemble& a, const Ensemble& b) {
  require(a.size() == b.size(), Errc::UnequalCounts, "ensembles differ in size");
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a.diverged[i] && !b.diverged[i]) rows.push_back(static_cast<Eigen::Index>(i));
  if (rows.empty()) fail(Errc::EmptyAfterExclusion, "no trajectory stayed finite in both ensembles");
  SampleMatrix pa(static_cast<Eigen::Index>(rows.size()), a.samples.cols());
  SampleMatrix pb(static_cast<Eigen::Index>(rows.size()), b.samples.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    pa.row(static_cast<Eigen::Index>(k)) = a.samples.row(rows[k]);
    pb.row(static_cast<Eigen::Index>(k)) = b.samples.row(rows[k]);
  }
  return {EmpiricalMeasure(std::move(pa)), EmpiricalMeasure(std::move(pb))};
}

// Equal-size clouds for unpaired comparisons: subsample the larger one.
std::pair<EmpiricalMeasure, EmpiricalMeasure> equalize(EmpiricalMeasure a, EmpiricalMeasure b, std::uint64_t seed) {
  if (a.size() > b.size()) a = subsample(a, b.size(), seed);
  else if (b.size() > a.size()) b = subsample(b, a.size(), seed);
  return {std::move(a), std::move(b)};
}

struct MeanSe {
  double mean;
  double se;
};

MeanSe mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  if (v.empty()) return {kNaN, kNaN};
  const double mean = pairwise_sum(v.data(), v.size()) / n;
  if (v.size() < 2) return {mean, kNaN};
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
  return {mean, std::sqrt(pairwise_sum(sq.data(), sq.size()) / (n - 1.0) / n)};
}

void fit_both(const std::vector<double>& taus, const std::vector<double>& errors,
              std::optional<RateFit>& logtau, std::optional<RateFit>& loglog) {
  if (taus.size() < 3) return;
  for (double e : errors)
    if (!(e > 0.0) || !std::isfinite(e)) return;
  logtau = fit_log_rate(taus, errors, RateModel::LogTau);
  loglog = fit_log_rate(taus, errors, RateModel::LogTauLogCorrected);
}

double quantile_sorted(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

// ---------------------------------------------------------------------------------------

ConvergenceReport weak_error_study(const SdeProblem& p, const SchemeSpec& s, const InitialCondition& x0,
                                   const WeakErrorParams& params, const StudyContext& ctx) {
  validate_taus(params.taus, p, 1);
  require_power_of_two(params.ref_refinement, "ref_refinement");
  require(params.M >= 2, Errc::ConfigError, "M must be >= 2");
  const double tau_ref = params.taus.back() / static_cast<double>(params.ref_refinement);
  const auto R = refinements(params.taus, tau_ref);
  for (double t : params.taus) step_count(params.T, t);
  const std::int64_t n_fine = step_count(params.T, tau_ref);

  std::vector<LevelSpec> levels;
  for (auto r : R) levels.push_back({s, r});
  levels.push_back({s, 1});
  const NoisePlan plan{ctx.seed, p.m(), tau_ref, R.front(), n_fine};
  SimulationOptions opts;
  opts.workers = ctx.workers;
  const auto res = simulate_levels(p, levels, x0, plan, params.M, {n_fine}, opts);

  const Ensemble& ref = res.back()[0];
  if (ref.n_diverged() > 0)
    fail(Errc::DivergenceInReference, std::to_string(ref.n_diverged()) + " reference trajectories diverged");

  ConvergenceReport rep;
  rep.problem = p.name();
  rep.scheme = std::string(to_string(s.kind()));
  rep.T = params.T;
  rep.M = params.M;
  rep.tau_ref = tau_ref;
  rep.taus = params.taus;
  for (std::size_t i = 0; i < params.taus.size(); ++i) {
    const Ensemble& e = res[i][0];
    rep.diverged_fraction.push_back(e.diverged_fraction());
    if (e.n_diverged() == e.size()) {
      rep.errors.push_back(kNaN);
      rep.std_errors.push_back(kNaN);
      rep.n_effective.push_back(0);
      continue;
    }
    const auto [a, b] = common_finite(e, ref);
    rep.errors.push_back(wasserstein1(a, b, params.estimator, ctx.seed));
    rep.std_errors.push_back(w1_se_paired(a, b, 64, ctx.seed));
    rep.n_effective.push_back(a.size());
    if (params.exact_law && p.d() == 1) {
      rep.exact_errors.push_back(w1_to_gaussian_1d(a, params.exact_law->mean[0], params.exact_law->sd[0]));
      rep.exact_std_errors.push_back(w1_se_to_law(a));
    }
  }

  fit_both(rep.taus, rep.errors, rep.fit_logtau, rep.fit_loglog);
  rep.slopes_defined = rep.fit_logtau.has_value();
  if (rep.slopes_defined)
    rep.better_model = rep.fit_logtau->residual <= rep.fit_loglog->residual ? "logtau" : "logtau_logcorrected";
  rep.monotone = true;
  for (std::size_t i = 0; i < rep.taus.size(); ++i)
    for (std::size_t j = i + 1; j < rep.taus.size(); ++j)  // taus[j] < taus[i]
      if (!(rep.errors[j] <= rep.errors[i] + 3.0 * (rep.std_errors[i] + rep.std_errors[j]))) rep.monotone = false;
  return rep;
}

// ---------------------------------------------------------------------------------------

// Bootstrap SE of consecutive error differences. Rows are resampled jointly over every level and
// the reference (the last level), so the shared-noise correlation is kept.
std::vector<double> decrease_se(const std::vector<std::vector<Ensemble>>& res, std::size_t n_levels,
                                W1Estimator est, std::uint64_t seed) {
  if (n_levels < 2) return {};
  const Ensemble& ref = res.back()[1];
  std::vector<Eigen::Index> rows;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    bool ok = !ref.diverged[k];
    for (std::size_t i = 0; ok && i < n_levels; ++i) ok = !res[i][1].diverged[k];
    if (ok) rows.push_back(static_cast<Eigen::Index>(k));
  }
  const std::size_t n = rows.size(), d = static_cast<std::size_t>(ref.samples.cols());
  if (n < 2) return std::vector<double>(n_levels - 1, kNaN);
  const std::size_t B = d == 1 ? kBootstrapResamples : kBootstrapResamples / 5;
  std::vector<std::vector<double>> diff(n_levels - 1, std::vector<double>(B));
  std::vector<Eigen::Index> pick(n);
  auto gather = [&](const Ensemble& e) {
    SampleMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < n; ++k) m.row(static_cast<Eigen::Index>(k)) = e.samples.row(pick[k]);
    return EmpiricalMeasure(std::move(m));
  };
  for (std::size_t r = 0; r < B; ++r) {
    CounterStream g(seed, r, Purpose::Bootstrap, 2);
    for (auto& q : pick) q = rows[static_cast<std::size_t>(uniform_index(g, n))];
    const EmpiricalMeasure b = gather(ref);
    std::vector<double> w(n_levels);
    for (std::size_t i = 0; i < n_levels; ++i) w[i] = wasserstein1(gather(res[i][1]), b, est, seed);
    for (std::size_t i = 0; i + 1 < n_levels; ++i) diff[i][r] = w[i] - w[i + 1];
  }
  std::vector<double> out;
  for (const auto& v : diff) out.push_back(mean_se(v).se * std::sqrt(static_cast<double>(B)));
  return out;
}

ErgodicityReport invariant_measure_study(const SdeProblem& p, const SchemeSpec& s, const InitialCondition& x0,
                                         const InvariantParams& params, const StudyContext& ctx) {
  validate_taus(params.taus, p, 1);
  require_power_of_two(params.ref_refinement, "ref_refinement");
  require(params.M >= 2, Errc::ConfigError, "M must be >= 2");
  require(params.N_long >= 2, Errc::ConfigError, "N_long must be >= 2");
  const double tau_min = params.taus.back();
  const double T_long = static_cast<double>(params.N_long) * tau_min;
  require(T_long >= 10.0 / p.constants().K4 * (1.0 - 1e-12), Errc::ConfigError,
          "N_long * min(taus) must be at least 10 / K4");
  const double tau_ref = tau_min / static_cast<double>(params.ref_refinement);
  const auto R = refinements(params.taus, tau_ref);
  const std::int64_t n_fine = params.N_long * params.ref_refinement;
  for (auto r : R)
    require((n_fine / 2) % r == 0, Errc::ConfigError, "half the horizon must fall on every tau grid");

  std::vector<LevelSpec> levels;
  for (auto r : R) levels.push_back({s, r});
  levels.push_back({s, 1});
  const NoisePlan plan{ctx.seed, p.m(), tau_ref, R.front(), n_fine};
  SimulationOptions opts;
  opts.workers = ctx.workers;
  const auto res = simulate_levels(p, levels, x0, plan, params.M, {n_fine / 2, n_fine}, opts);

  const Ensemble& ref = res.back()[1];
  if (ref.n_diverged() > 0)
    fail(Errc::DivergenceInReference, std::to_string(ref.n_diverged()) + " reference trajectories diverged");

  ErgodicityReport rep;
  rep.problem = p.name();
  rep.scheme = std::string(to_string(s.kind()));
  rep.M = params.M;
  rep.T_long = T_long;
  rep.tau_ref = tau_ref;
  rep.burn_in_steps = params.N_long / 2;
  rep.taus = params.taus;

  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto [h, f] = common_finite(res[l][0], res[l][1]);
    const double w = wasserstein1(h, f, params.estimator, ctx.seed);
    const double se = w1_se_paired(h, f, 64, ctx.seed);
    rep.burn_in_w1.push_back(w);
    rep.burn_in_se.push_back(se);
    if (w > 3.0 * se)
      fail(Errc::BurnInTooShort, "W1 between the half-horizon and terminal ensembles at tau = " +
                                     std::to_string(res[l][1].meta.tau) + " exceeds 3 SE");
  }

  const bool exact = p.stationary_law().has_value() && p.d() == 1;
  for (std::size_t i = 0; i < params.taus.size(); ++i) {
    const auto [a, b] = common_finite(res[i][1], ref);
    rep.errors.push_back(wasserstein1(a, b, params.estimator, ctx.seed));
    rep.std_errors.push_back(w1_se_paired(a, b, 64, ctx.seed));
    rep.n_effective.push_back(a.size());
    if (exact) {
      rep.exact_errors.push_back(w1_to_gaussian_1d(a, p.stationary_law()->mean[0], p.stationary_law()->sd[0]));
      rep.exact_std_errors.push_back(w1_se_to_law(a));
    }
  }
  if (exact && params.taus.size() >= 2) {
    const std::size_t k = params.taus.size() - 1;
    const double t1 = params.taus[k], t2 = params.taus[k - 1];
    rep.exact_bias_bound = std::abs(rep.exact_errors[k - 1] - rep.exact_errors[k]) * t1 / (t2 - t1);
  }

  if (params.time_average_T > 0.0) {
    constexpr std::size_t kBatches = 32;
    for (std::size_t i = 0; i < params.taus.size(); ++i) {
      const double tau = params.taus[i];
      const EmpiricalMeasure fin = EmpiricalMeasure::from_ensemble(res[i][1]);
      std::vector<double> r(fin.size());
      for (std::size_t k = 0; k < fin.size(); ++k) r[k] = norm(fin.points.row(static_cast<Eigen::Index>(k)).data(), fin.d());
      const MeanSe ens = mean_se(r);

      const std::int64_t burn = step_count(T_long / 2.0, tau);
      const std::int64_t n_avg = step_count(params.time_average_T, tau);
      const std::int64_t per_batch = std::max<std::int64_t>(1, n_avg / static_cast<std::int64_t>(kBatches));
      std::vector<double> batch_sum(kBatches, 0.0);
      std::vector<std::int64_t> batch_n(kBatches, 0);
      bool diverged = false;
      SimulationOptions topts;
      topts.trajectory_offset = params.M;
      const std::size_t d = p.d();
      topts.observer = [&](const StepEvent& ev) {
        if (ev.step <= burn) return;
        const double v = norm(ev.states, d);
        if (!std::isfinite(v)) {
          diverged = true;
          return;
        }
        const auto b = std::min<std::size_t>(kBatches - 1, static_cast<std::size_t>((ev.step - burn - 1) / per_batch));
        batch_sum[b] += v;
        ++batch_n[b];
      };
      const NoisePlan tplan{ctx.seed, p.m(), tau, 1, burn + n_avg};
      simulate_levels(p, {LevelSpec{s, 1}}, x0, tplan, 1, {burn + n_avg}, topts);
      std::vector<double> means;
      for (std::size_t b = 0; b < kBatches; ++b)
        if (batch_n[b] > 0) means.push_back(batch_sum[b] / static_cast<double>(batch_n[b]));
      const MeanSe ta = diverged ? MeanSe{kNaN, kNaN} : mean_se(means);
      TimeAverageCheck chk{ens.mean, ens.se, ta.mean, ta.se, false};
      chk.agree = std::abs(ens.mean - ta.mean) <= 3.0 * std::sqrt(ens.se * ens.se + ta.se * ta.se);
      rep.time_average.push_back(chk);
    }
  }

  fit_both(rep.taus, rep.errors, rep.fit_logtau, rep.fit_loglog);
  rep.decrease_std_errors = decrease_se(res, params.taus.size(), params.estimator, ctx.seed);
  rep.strictly_decreasing = true;
  rep.decreasing_beyond_noise = true;
  for (std::size_t i = 0; i + 1 < rep.taus.size(); ++i) {
    const double gap = rep.errors[i] - rep.errors[i + 1];
    if (!(gap > 0.0)) rep.strictly_decreasing = false;
    if (!(gap > 3.0 * rep.decrease_std_errors[i])) rep.decreasing_beyond_noise = false;
  }
  return rep;
}

// ---------------------------------------------------------------------------------------

MomentStabilityReport moment_stability_study(const SdeProblem& p, const SchemeSpec& s, const InitialCondition& x0,
                                             const MomentParams& params, const StudyContext& ctx) {
  const auto& c = p.constants();
  require(params.tau > 0.0 && params.tau < c.tau_max(), Errc::ConfigError, "tau must lie in (0, tau_max)");
  require(params.N >= 1 && params.M >= 1, Errc::ConfigError, "N and M must be >= 1");
  for (int q : params.orders)
    require(q >= 2 && q % 2 == 0 && q <= 2.0 * c.p_star, Errc::ConfigError,
            "moment orders must be even and at most 2 p_star");
  const std::size_t n_chunks = chunk_count(params.M);
  const std::size_t n_steps = static_cast<std::size_t>(params.N) + 1;
  const std::size_t n_orders = params.orders.size();
  const std::size_t d = p.d();

  // sums[(chunk·n_steps + n)·n_orders + o], counts[chunk·n_steps + n]
  std::vector<double> sums(n_chunks * n_steps * n_orders, 0.0);
  std::vector<double> counts(n_chunks * n_steps, 0.0);
  SimulationOptions opts;
  opts.workers = ctx.workers;
  opts.observer = [&](const StepEvent& ev) {
    const std::size_t base = ev.chunk * n_steps + static_cast<std::size_t>(ev.step);
    for (std::size_t k = 0; k < ev.count; ++k) {
      const double* y = ev.states + k * d;
      if (!all_finite(y, d)) continue;
      const double r2 = squared_norm(y, d);
      counts[base] += 1.0;
      for (std::size_t o = 0; o < n_orders; ++o) {
        double v = 1.0;
        for (int e = 0; e < params.orders[o] / 2; ++e) v *= r2;
        sums[base * n_orders + o] += v;
      }
    }
  };
  const NoisePlan plan{ctx.seed, p.m(), params.tau, 1, params.N};
  const auto res = simulate_levels(p, {LevelSpec{s, 1}}, x0, plan, params.M, {params.N}, opts);
  const Ensemble& e = res[0][0];

  MomentStabilityReport rep;
  rep.problem = p.name();
  rep.scheme = std::string(to_string(s.kind()));
  rep.tau = params.tau;
  rep.tau_max = c.tau_max();
  rep.N = params.N;
  rep.M = params.M;
  rep.n_diverged = e.n_diverged();
  rep.diverged_fraction = e.diverged_fraction();
  if (rep.n_diverged < e.size()) {
    rep.terminal = moments(e, params.orders, ctx.seed, c.p_star);
  } else {
    rep.terminal.orders = params.orders;
    rep.terminal.n_excluded = e.size();
  }

  // Chunk-level bootstrap resamples, shared by every order and step.
  std::vector<std::vector<std::size_t>> resample(kBootstrapResamples, std::vector<std::size_t>(n_chunks));
  for (std::size_t r = 0; r < kBootstrapResamples; ++r) {
    CounterStream g(ctx.seed, r, Purpose::Bootstrap, 1);
    for (auto& idx : resample[r]) idx = static_cast<std::size_t>(uniform_index(g, n_chunks));
  }
  auto moment_at = [&](std::size_t n, std::size_t o, const std::vector<std::size_t>* pick) {
    double s_sum = 0.0, s_cnt = 0.0;
    for (std::size_t k = 0; k < n_chunks; ++k) {
      const std::size_t ch = pick ? (*pick)[k] : k;
      s_sum += sums[(ch * n_steps + n) * n_orders + o];
      s_cnt += counts[ch * n_steps + n];
    }
    return s_cnt > 0.0 ? s_sum / s_cnt : kNaN;
  };

  const double a = 1.0 - c.K4 * params.tau / 8.0;
  for (std::size_t o = 0; o < n_orders; ++o) {
    MomentSeries ms;
    ms.order = params.orders[o];
    for (std::size_t n = 0; n < n_steps; ++n) ms.values.push_back(moment_at(n, o, nullptr));
    ms.initial = ms.values.front();
    ms.sup = -std::numeric_limits<double>::infinity();
    for (double v : ms.values) ms.sup = std::isnan(v) ? v : std::max(ms.sup, v);
    const std::size_t tail0 = n_steps - std::max<std::size_t>(1, n_steps / 4);
    double tail = 0.0;
    for (std::size_t n = tail0; n < n_steps; ++n) tail += ms.values[n];
    tail /= static_cast<double>(n_steps - tail0);
    ms.c_hat = c.K4 / 4.0 * tail;
    ms.threshold = 8.0 * ms.c_hat / c.K4;
    ms.worst_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n + 1 < n_steps; ++n) {
      if (!(ms.values[n] > ms.threshold) || !std::isfinite(ms.values[n])) continue;
      ++ms.n_checked;
      std::vector<double> ex(kBootstrapResamples);
      for (std::size_t r = 0; r < kBootstrapResamples; ++r)
        ex[r] = moment_at(n + 1, o, &resample[r]) - a * moment_at(n, o, &resample[r]) - ms.c_hat * params.tau;
      const double upper = quantile_sorted(ex, 0.99);
      ms.worst_excess = std::max(ms.worst_excess, upper);
      if (!(upper <= 0.0)) ++ms.n_violations;
    }
    if (ms.n_checked == 0) ms.worst_excess = kNaN;
    rep.series.push_back(std::move(ms));
  }
  return rep;
}

// ---------------------------------------------------------------------------------------

BlowupReport blowup_study(const SdeProblem& p, const InitialCondition& x0, const BlowupParams& params,
                          const StudyContext& ctx) {
  require(p.gamma() > 1.0, Errc::ConfigError, "blow-up study needs a superlinear problem");
  require(params.tau > 0.0 && params.N >= 1 && params.M >= 1, Errc::ConfigError, "tau, N and M must be positive");
  const std::vector<SchemeSpec> schemes{SchemeSpec::em(), SchemeSpec::tem(p.gamma()), SchemeSpec::pem(p.gamma())};
  const std::size_t L = schemes.size();
  const std::size_t n_chunks = chunk_count(params.M);
  const std::size_t n_steps = static_cast<std::size_t>(params.N) + 1;
  const std::size_t d = p.d();

  // [(level·n_chunks + chunk)·n_steps + n]
  std::vector<double> s2(L * n_chunks * n_steps, 0.0), s4(L * n_chunks * n_steps, 0.0), cnt(L * n_chunks * n_steps, 0.0);
  std::vector<double> maxn(L * n_chunks, 0.0);
  SimulationOptions opts;
  opts.workers = ctx.workers;
  opts.observer = [&](const StepEvent& ev) {
    const std::size_t base = (ev.level * n_chunks + ev.chunk) * n_steps + static_cast<std::size_t>(ev.step);
    double& mx = maxn[ev.level * n_chunks + ev.chunk];
    for (std::size_t k = 0; k < ev.count; ++k) {
      const double* y = ev.states + k * d;
      if (!all_finite(y, d)) continue;
      const double r2 = squared_norm(y, d);
      s2[base] += r2;
      s4[base] += r2 * r2;
      cnt[base] += 1.0;
      mx = std::max(mx, std::sqrt(r2));
    }
  };
  std::vector<LevelSpec> levels;
  for (const auto& sc : schemes) levels.push_back({sc, 1});
  const NoisePlan plan{ctx.seed, p.m(), params.tau, 1, params.N};
  const auto res = simulate_levels(p, levels, x0, plan, params.M, {params.N}, opts);

  BlowupReport rep;
  rep.problem = p.name();
  rep.tau = params.tau;
  rep.N = params.N;
  rep.M = params.M;
  for (std::size_t l = 0; l < L; ++l) {
    BlowupScheme bs;
    bs.scheme = std::string(to_string(schemes[l].kind()));
    bs.diverged_fraction = res[l][0].diverged_fraction();
    for (std::size_t n = 0; n < n_steps; ++n) {
      double a2 = 0.0, a4 = 0.0, c = 0.0;
      for (std::size_t ch = 0; ch < n_chunks; ++ch) {
        const std::size_t idx = (l * n_chunks + ch) * n_steps + n;
        a2 += s2[idx];
        a4 += s4[idx];
        c += cnt[idx];
      }
      bs.second_moment.push_back(c > 0.0 ? a2 / c : kNaN);
      bs.fourth_moment.push_back(c > 0.0 ? a4 / c : kNaN);
    }
    for (std::size_t ch = 0; ch < n_chunks; ++ch) bs.max_norm = std::max(bs.max_norm, maxn[l * n_chunks + ch]);
    rep.schemes.push_back(std::move(bs));
  }
  rep.em_exceeds_modified = rep.schemes[0].diverged_fraction > rep.schemes[1].diverged_fraction &&
                            rep.schemes[0].diverged_fraction > rep.schemes[2].diverged_fraction;

  // One PEM step from inside the ball moves by at most τ sup|b| + Σ_j sup|σ_j|·|ΔW_j|.
  rep.pem_radius = projection_radius(params.tau, p.gamma());
  const SampleMatrix pts = [&] {
    const SampleMatrix rnd = sample_ball(d, 4000, rep.pem_radius, ctx.seed);
    const SampleMatrix grid = coarse_grid(d, rep.pem_radius, 400);
    SampleMatrix all(rnd.rows() + grid.rows(), static_cast<Eigen::Index>(d));
    all << rnd, grid;
    return all;
  }();
  double bmax = 0.0, smax = 0.0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Vec x = pts.row(i).transpose();
    bmax = std::max(bmax, norm(p.drift(x)));
    const Mat sg = p.diffusion(x);
    double col_sum = 0.0;
    for (Eigen::Index j = 0; j < sg.cols(); ++j) col_sum += sg.col(j).norm();
    smax = std::max(smax, col_sum);
  }
  rep.pem_step_bound = rep.pem_radius + params.tau * bmax + 10.0 * std::sqrt(params.tau) * smax;
  rep.pem_within_bound = rep.schemes[2].max_norm <= rep.pem_step_bound;
  return rep;
}

// ---------------------------------------------------------------------------------------

ContractionReport contraction_study(const SdeProblem& p, const SchemeSpec& s, const ContractionParams& params,
                                    const StudyContext& ctx) {
  require(params.T_list.size() >= 2, Errc::ConfigError, "T_list needs at least two horizons");
  require(params.M >= 2, Errc::ConfigError, "M must be >= 2");
  for (std::size_t i = 1; i < params.T_list.size(); ++i)
    require(params.T_list[i] > params.T_list[i - 1], Errc::ConfigError, "T_list must be increasing");
  std::vector<std::int64_t> snaps;
  for (double T : params.T_list) snaps.push_back(step_count(T, params.tau));
  const NoisePlan plan{ctx.seed, p.m(), params.tau, 1, snaps.back()};
  NoisePlan indep = plan;
  indep.seed = ctx.seed + 1;
  SimulationOptions opts;
  opts.workers = ctx.workers;
  const std::vector<LevelSpec> lv{{s, 1}};
  const auto ra = simulate_levels(p, lv, InitialCondition::point(params.x0_a), plan, params.M, snaps, opts);
  const auto rb = simulate_levels(p, lv, InitialCondition::point(params.x0_b), plan, params.M, snaps, opts);
  const auto rc = simulate_levels(p, lv, InitialCondition::point(params.x0_a), indep, params.M, snaps, opts);

  ContractionReport rep;
  rep.problem = p.name();
  rep.scheme = std::string(to_string(s.kind()));
  rep.tau = params.tau;
  rep.M = params.M;
  rep.T_list = params.T_list;
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    const auto [a, b] = common_finite(ra[0][k], rb[0][k]);
    rep.w1.push_back(wasserstein1(a, b, W1Estimator::Auto, ctx.seed));
    rep.std_errors.push_back(w1_se_paired(a, b, 64, ctx.seed));
    const auto [ba, bc] = equalize(EmpiricalMeasure::from_ensemble(ra[0][k]),
                                   EmpiricalMeasure::from_ensemble(rc[0][k]), ctx.seed);
    rep.baseline_w1.push_back(wasserstein1(ba, bc, W1Estimator::Auto, ctx.seed));
    rep.baseline_se.push_back(w1_se_unpaired(ba, bc, 64, ctx.seed));
  }
  rep.strictly_decreasing = true;
  for (std::size_t i = 0; i + 1 < snaps.size(); ++i) {
    rep.lag_rates.push_back(-std::log(rep.w1[i + 1] / rep.w1[i]) / (rep.T_list[i + 1] - rep.T_list[i]));
    if (!(rep.w1[i] - rep.w1[i + 1] > 3.0 * (rep.std_errors[i] + rep.std_errors[i + 1]))) rep.strictly_decreasing = false;
  }
  bool positive = true;
  for (double w : rep.w1) positive = positive && w > 0.0 && std::isfinite(w);
  if (positive && rep.T_list.size() >= 4) {
    std::vector<double> lw;
    for (double w : rep.w1) lw.push_back(std::log(w));
    rep.decay_fit = fit_line(rep.T_list, lw);
    rep.lambda_hat = -rep.decay_fit->slope;
  }
  return rep;
}

// ---------------------------------------------------------------------------------------

GradientEstimate bel_gradient(const SdeProblem& p, const TestFunction& phi, const BelParams& params,
                              const StudyContext& ctx) {
  require(p.m() == p.d(), Errc::DimensionMismatch, "the gradient formula requires m = d");
  require(params.t > 0.0 && params.M >= 2, Errc::ConfigError, "t must be positive and M >= 2");
  require(static_cast<std::size_t>(params.x.size()) == p.d() && static_cast<std::size_t>(params.v.size()) == p.d(),
          Errc::DimensionMismatch, "x and v must have dimension d");
  step_count(params.t, params.tau);
  std::vector<double> vals(params.M, kNaN);
  parallel_for(chunk_count(params.M), ctx.workers, [&](std::size_t chunk) {
    const std::size_t first = chunk * kChunkSize;
    const std::size_t last = std::min(params.M, first + kChunkSize);
    for (std::size_t i = first; i < last; ++i) {
      const auto st = simulate_first_variation(p, params.x, params.v, params.tau, params.t, ctx.seed, i);
      if (!st.diverged) vals[i] = st.accum * phi(st.x) / params.t;
    }
  });
  std::vector<double> used;
  for (double v : vals)
    if (std::isfinite(v)) used.push_back(v);
  const MeanSe r = mean_se(used);
  return {r.mean, r.se, used.size()};
}

GradientEstimate finite_difference_gradient(const SdeProblem& p, const SchemeSpec& s, const TestFunction& phi,
                                            const BelParams& params, double h, const StudyContext& ctx) {
  require(h > 0.0, Errc::ConfigError, "h must be positive");
  require(params.M >= 2, Errc::ConfigError, "M must be >= 2");
  const Vec xp = params.x + h * params.v;
  const Vec xm = params.x - h * params.v;
  SimulationOptions opts;
  opts.workers = ctx.workers;
  const Ensemble ep = simulate_ensemble(p, s, InitialCondition::point(xp), params.tau, params.t, params.M, ctx.seed, opts);
  const Ensemble em = simulate_ensemble(p, s, InitialCondition::point(xm), params.tau, params.t, params.M, ctx.seed, opts);
  std::vector<double> used;
  for (std::size_t i = 0; i < params.M; ++i) {
    if (ep.diverged[i] || em.diverged[i]) continue;
    const Vec a = ep.samples.row(static_cast<Eigen::Index>(i)).transpose();
    const Vec b = em.samples.row(static_cast<Eigen::Index>(i)).transpose();
    used.push_back((phi(a) - phi(b)) / (2.0 * h));
  }
  const MeanSe r = mean_se(used);
  return {r.mean, r.se, used.size()};
}

// ---------------------------------------------------------------------------------------
// JSON

namespace {

Json opt_fit(const std::optional<RateFit>& f) { return f ? to_json(*f) : Json(nullptr); }

template <class T>
Json opt_value(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

Json to_json(const RateFit& f) {
  Json j;
  j["slope"] = f.slope;
  j["intercept"] = f.intercept;
  j["residual"] = f.residual;
  return j;
}

Json to_json(const SampledCheckReport& r) {
  Json j;
  j["assumption_id"] = std::string(to_string(r.assumption_id));
  j["inequality"] = r.inequality;
  j["n_points"] = r.n_points;
  j["n_violations"] = r.n_violations;
  j["worst_margin"] = r.worst_margin;
  j["sampled_radius"] = r.sampled_radius;
  j["fitted_constant"] = opt_value(r.fitted_constant);
  j["growth_slope"] = opt_value(r.growth_slope);
  j["passed"] = r.passed();
  return j;
}

Json to_json(const MomentReport& r) {
  Json j;
  j["orders"] = r.orders;
  j["values"] = r.values;
  j["std_errors"] = r.std_errors;
  j["n_used"] = r.n_used;
  j["n_excluded"] = r.n_excluded;
  return j;
}

Json to_json(const ConvergenceReport& r) {
  Json j;
  j["problem"] = r.problem;
  j["scheme"] = r.scheme;
  j["T"] = r.T;
  j["M"] = r.M;
  j["tau_ref"] = r.tau_ref;
  j["taus"] = r.taus;
  j["errors"] = r.errors;
  j["std_errors"] = r.std_errors;
  j["n_effective"] = r.n_effective;
  j["diverged_fraction"] = r.diverged_fraction;
  if (!r.exact_errors.empty()) {
    j["exact_errors"] = r.exact_errors;
    j["exact_std_errors"] = r.exact_std_errors;
  }
  j["slopes_defined"] = r.slopes_defined;
  j["fit_logtau"] = opt_fit(r.fit_logtau);
  j["fit_loglog"] = opt_fit(r.fit_loglog);
  j["slope_logtau"] = r.fit_logtau ? Json(r.fit_logtau->slope) : Json(nullptr);
  j["slope_loglog"] = r.fit_loglog ? Json(r.fit_loglog->slope) : Json(nullptr);
  j["better_model"] = r.better_model.empty() ? Json(nullptr) : Json(r.better_model);
  j["monotone"] = r.monotone;
  return j;
}

Json to_json(const ErgodicityReport& r) {
  Json j;
  j["problem"] = r.problem;
  j["scheme"] = r.scheme;
  j["M"] = r.M;
  j["T_long"] = r.T_long;
  j["tau_ref"] = r.tau_ref;
  j["burn_in_steps"] = r.burn_in_steps;
  j["taus"] = r.taus;
  j["errors"] = r.errors;
  j["std_errors"] = r.std_errors;
  j["n_effective"] = r.n_effective;
  j["burn_in_w1"] = r.burn_in_w1;
  j["burn_in_se"] = r.burn_in_se;
  Json ta = Json::array();
  for (const auto& t : r.time_average) {
    Json e;
    e["ensemble_mean_norm"] = t.ensemble_mean;
    e["ensemble_se"] = t.ensemble_se;
    e["time_average_mean_norm"] = t.time_mean;
    e["time_average_se"] = t.time_se;
    e["agree"] = t.agree;
    ta.push_back(e);
  }
  j["time_average"] = ta;
  if (!r.exact_errors.empty()) {
    j["exact_errors"] = r.exact_errors;
    j["exact_std_errors"] = r.exact_std_errors;
    j["exact_bias_bound"] = opt_value(r.exact_bias_bound);
  }
  j["fit_logtau"] = opt_fit(r.fit_logtau);
  j["fit_loglog"] = opt_fit(r.fit_loglog);
  j["strictly_decreasing"] = r.strictly_decreasing;
  j["decrease_std_errors"] = r.decrease_std_errors;
  j["decreasing_beyond_noise"] = r.decreasing_beyond_noise;
  return j;
}

Json to_json(const MomentStabilityReport& r) {
  Json j;
  j["problem"] = r.problem;
  j["scheme"] = r.scheme;
  j["tau"] = r.tau;
  j["tau_max"] = r.tau_max;
  j["N"] = r.N;
  j["M"] = r.M;
  j["n_diverged"] = r.n_diverged;
  j["diverged_fraction"] = r.diverged_fraction;
  Json series = Json::array();
  for (const auto& s : r.series) {
    Json e;
    e["order"] = s.order;
    e["initial"] = s.initial;
    e["sup"] = s.sup;
    e["c_hat"] = s.c_hat;
    e["threshold"] = s.threshold;
    e["n_checked"] = s.n_checked;
    e["n_violations"] = s.n_violations;
    e["worst_excess"] = s.worst_excess;
    series.push_back(e);
  }
  j["series"] = series;
  j["terminal"] = to_json(r.terminal);
  return j;
}

Json to_json(const BlowupReport& r) {
  Json j;
  j["problem"] = r.problem;
  j["tau"] = r.tau;
  j["N"] = r.N;
  j["M"] = r.M;
  Json arr = Json::array();
  for (const auto& s : r.schemes) {
    Json e;
    e["scheme"] = s.scheme;
    e["diverged_fraction"] = s.diverged_fraction;
    e["final_second_moment"] = s.second_moment.back();
    e["final_fourth_moment"] = s.fourth_moment.back();
    e["max_norm"] = s.max_norm;
    arr.push_back(e);
  }
  j["schemes"] = arr;
  j["em_exceeds_modified"] = r.em_exceeds_modified;
  j["pem_radius"] = r.pem_radius;
  j["pem_step_bound"] = r.pem_step_bound;
  j["pem_within_bound"] = r.pem_within_bound;
  return j;
}

Json to_json(const ContractionReport& r) {
  Json j;
  j["problem"] = r.problem;
  j["scheme"] = r.scheme;
  j["tau"] = r.tau;
  j["M"] = r.M;
  j["T_list"] = r.T_list;
  j["w1"] = r.w1;
  j["std_errors"] = r.std_errors;
  j["baseline_w1"] = r.baseline_w1;
  j["baseline_se"] = r.baseline_se;
  j["lag_rates"] = r.lag_rates;
  j["lambda_hat"] = opt_value(r.lambda_hat);
  j["decay_fit"] = opt_fit(r.decay_fit);
  j["strictly_decreasing"] = r.strictly_decreasing;
  return j;
}

Json to_json(const GradientEstimate& g) {
  Json j;
  j["estimate"] = g.estimate;
  j["std_error"] = g.std_error;
  j["n_used"] = g.n_used;
  return j;
}

}  // namespace memsde
