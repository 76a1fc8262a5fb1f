#include "memsde/simulate.hpp"

#include "memsde/checks.hpp"
#include "memsde/error.hpp"
#include "memsde/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace memsde {

InitialCondition InitialCondition::point(Vec x0) {
  require(x0.size() >= 1, Errc::InvalidArgument, "initial point must be non-empty");
  require(all_finite(x0.data(), static_cast<std::size_t>(x0.size())), Errc::InvalidArgument,
          "initial point must be finite");
  InitialCondition ic;
  ic.mean_ = std::move(x0);
  return ic;
}

InitialCondition InitialCondition::gaussian(GaussianLaw law) {
  require(law.mean.size() >= 1 && law.mean.size() == law.sd.size(), Errc::InvalidArgument,
          "Gaussian initial law needs matching mean and sd");
  require((law.sd.array() >= 0.0).all(), Errc::InvalidArgument, "Gaussian sd must be >= 0");
  InitialCondition ic;
  ic.mean_ = law.mean;
  ic.law_ = std::move(law);
  return ic;
}

void InitialCondition::sample(std::uint64_t seed, std::uint64_t trajectory_id, double* out) const {
  const std::size_t dd = d();
  if (!law_) {
    std::copy(mean_.data(), mean_.data() + dd, out);
    return;
  }
  CounterStream g(seed, trajectory_id, Purpose::InitialState);
  for (std::size_t i = 0; i < dd; ++i) out[i] = law_->mean[i] + law_->sd[i] * g.normal();
}

std::size_t Ensemble::n_diverged() const {
  return static_cast<std::size_t>(
      std::count_if(diverged.begin(), diverged.end(), [](const auto& v) { return v.has_value(); }));
}

double Ensemble::diverged_fraction() const {
  return size() == 0 ? 0.0 : static_cast<double>(n_diverged()) / static_cast<double>(size());
}

SampleMatrix Ensemble::finite_samples() const {
  SampleMatrix out(static_cast<Eigen::Index>(size() - n_diverged()), samples.cols());
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < size(); ++i)
    if (!diverged[i]) out.row(r++) = samples.row(static_cast<Eigen::Index>(i));
  return out;
}

std::int64_t step_count(double T, double tau) {
  require(tau > 0.0 && std::isfinite(tau), Errc::ConfigError, "tau must be positive");
  require(T > 0.0 && std::isfinite(T), Errc::ConfigError, "T must be positive");
  const double q = T / tau;
  const double n = std::round(q);
  if (n < 1.0 || std::abs(q - n) > 1e-9 * n || n > 9e15)
    fail(Errc::ConfigError, "T/tau must be a positive integer");
  return static_cast<std::int64_t>(n);
}

namespace {

constexpr std::size_t kNoiseBlock = 32;

void validate_custom(const SdeProblem& p, const SchemeSpec& s, double tau) {
  if (s.kind() != SchemeKind::CustomMEM) return;
  const auto reports = check_scheme_conditions(p, s, std::min(tau, 0.5 * p.constants().tau_max()), 500, 10.0, 0);
  for (const auto& r : reports)
    if (!r.passed())
      fail(Errc::ConfigError, "custom scheme fails " + r.inequality + " at sampled points");
}

}  // namespace

std::vector<std::vector<Ensemble>> simulate_levels(const SdeProblem& p, const std::vector<LevelSpec>& levels,
                                                   const InitialCondition& x0, const NoisePlan& plan,
                                                   std::size_t M, const std::vector<std::int64_t>& snapshot_fine_steps,
                                                   const SimulationOptions& options) {
  plan.validate();
  require(!levels.empty(), Errc::InvalidArgument, "at least one level is required");
  require(M >= 1, Errc::InvalidArgument, "M must be >= 1");
  require(plan.m == p.m(), Errc::DimensionMismatch, "noise plan dimension differs from the problem's m");
  require(x0.d() == p.d(), Errc::DimensionMismatch, "initial condition dimension differs from the problem's d");
  const std::size_t d = p.d(), m = p.m(), L = levels.size();
  const std::int64_t N = plan.n_steps_fine;

  for (const auto& lv : levels) {
    require(lv.refinement >= 1 && N % lv.refinement == 0, Errc::ConfigError,
            "level refinement must divide the number of fine steps");
    validate_custom(p, lv.scheme, plan.tau_fine * static_cast<double>(lv.refinement));
  }
  std::vector<std::int64_t> snaps = snapshot_fine_steps;
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
  require(!snaps.empty(), Errc::InvalidArgument, "at least one snapshot is required");
  for (auto sn : snaps) {
    require(sn >= 0 && sn <= N, Errc::ConfigError, "snapshot outside the simulated horizon");
    for (const auto& lv : levels)
      require(sn % lv.refinement == 0, Errc::ConfigError, "snapshot must fall on every level's grid");
  }

  std::vector<std::vector<Ensemble>> out(L, std::vector<Ensemble>(snaps.size()));
  for (std::size_t l = 0; l < L; ++l) {
    const double tau = plan.tau_fine * static_cast<double>(levels[l].refinement);
    for (std::size_t k = 0; k < snaps.size(); ++k) {
      Ensemble& e = out[l][k];
      e.samples.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(d));
      e.diverged.assign(M, std::nullopt);
      e.meta = {p.name(), std::string(to_string(levels[l].scheme.kind())), tau,
                static_cast<double>(snaps[k]) * plan.tau_fine, plan.seed};
    }
  }

  const double scale = std::sqrt(plan.tau_fine);
  const std::size_t n_chunks = chunk_count(M);

  parallel_for(n_chunks, options.workers, [&](std::size_t chunk) {
    const std::size_t first = chunk * kChunkSize;
    const std::size_t C = std::min(kChunkSize, M - first);
    std::vector<std::vector<double>> y(L, std::vector<double>(C * d));
    std::vector<std::vector<double>> acc(L, std::vector<double>(C * m, 0.0));
    std::vector<std::vector<std::int64_t>> div(L, std::vector<std::int64_t>(C, -1));
    std::vector<StepWorkspace> ws(L);
    // noise[(step·C + k)·m + j], so that one step's increments are contiguous across the chunk.
    std::vector<double> noise(kNoiseBlock * C * m);
    std::vector<double> row(kNoiseBlock * m);

    const std::uint64_t id0 = options.trajectory_offset + first;
    for (std::size_t k = 0; k < C; ++k) x0.sample(plan.seed, id0 + k, y[0].data() + k * d);
    for (std::size_t l = 1; l < L; ++l) y[l] = y[0];

    std::size_t next_snap = 0;
    auto take_snapshots = [&](std::int64_t fine_step) {
      while (next_snap < snaps.size() && snaps[next_snap] == fine_step) {
        for (std::size_t l = 0; l < L; ++l) {
          Ensemble& e = out[l][next_snap];
          for (std::size_t k = 0; k < C; ++k) {
            std::copy(y[l].data() + k * d, y[l].data() + (k + 1) * d,
                      e.samples.row(static_cast<Eigen::Index>(first + k)).data());
            if (div[l][k] >= 0) e.diverged[first + k] = div[l][k];
          }
        }
        ++next_snap;
      }
    };
    auto observe = [&](std::size_t l, std::int64_t step) {
      if (options.observer) options.observer(StepEvent{chunk, first, C, l, step, y[l].data()});
    };

    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t k = 0; k < C; ++k)
        if (!all_finite(y[l].data() + k * d, d)) div[l][k] = 0;
      observe(l, 0);
    }
    take_snapshots(0);

    for (std::int64_t n0 = 0; n0 < N; n0 += static_cast<std::int64_t>(kNoiseBlock)) {
      const auto B = static_cast<std::size_t>(std::min<std::int64_t>(kNoiseBlock, N - n0));
      for (std::size_t k = 0; k < C; ++k) {
        standard_normals(plan.seed, id0 + k, static_cast<std::uint64_t>(n0) * m, B * m, row.data());
        for (std::size_t sidx = 0; sidx < B; ++sidx)
          for (std::size_t j = 0; j < m; ++j) noise[(sidx * C + k) * m + j] = scale * row[sidx * m + j];
      }

      for (std::size_t sidx = 0; sidx < B; ++sidx) {
        const std::int64_t fine_step = n0 + static_cast<std::int64_t>(sidx) + 1;
        const double* z = noise.data() + sidx * C * m;
        for (std::size_t l = 0; l < L; ++l) {
          const std::int64_t R = levels[l].refinement;
          double* a = acc[l].data();
          // In-order sums starting from 0.0; for R = 1 the sum is the increment itself.
          if (R > 1)
            for (std::size_t q = 0; q < C * m; ++q) a[q] += z[q];
          if (fine_step % R != 0) continue;
          const double tau = plan.tau_fine * static_cast<double>(R);
          levels[l].scheme.advance(p, tau, tau, C, y[l].data(), R > 1 ? a : z, ws[l]);
          if (R > 1) std::fill(acc[l].begin(), acc[l].end(), 0.0);
          const std::int64_t level_step = fine_step / R;
          for (std::size_t k = 0; k < C; ++k) {
            if (div[l][k] >= 0) continue;
            const double* yk = y[l].data() + k * d;
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) s += yk[i];
            if (!std::isfinite(s) || !all_finite(yk, d)) div[l][k] = level_step;
          }
          observe(l, level_step);
        }
        take_snapshots(fine_step);
      }
    }
  });
  return out;
}

Ensemble simulate_ensemble(const SdeProblem& p, const SchemeSpec& s, const InitialCondition& x0,
                           double tau, double T, std::size_t M, std::uint64_t seed,
                           const SimulationOptions& options) {
  const std::int64_t N = step_count(T, tau);
  NoisePlan plan{seed, p.m(), tau, 1, N};
  auto res = simulate_levels(p, {LevelSpec{s, 1}}, x0, plan, M, {N}, options);
  return std::move(res[0][0]);
}

std::pair<Ensemble, Ensemble> simulate_coupled(const SdeProblem& p, const SchemeSpec& s_coarse,
                                               const SchemeSpec& s_fine, const InitialCondition& x0,
                                               double tau_coarse, double T, std::size_t M,
                                               std::int64_t refinement, std::uint64_t seed,
                                               const SimulationOptions& options) {
  require(refinement >= 1 && (refinement & (refinement - 1)) == 0, Errc::ConfigError,
          "refinement must be a power of two");
  const std::int64_t N = step_count(T, tau_coarse);
  const double tau_fine = tau_coarse / static_cast<double>(refinement);
  NoisePlan plan{seed, p.m(), tau_fine, refinement, N * refinement};
  auto res = simulate_levels(p, {LevelSpec{s_coarse, refinement}, LevelSpec{s_fine, 1}}, x0, plan, M,
                             {N * refinement}, options);
  return {std::move(res[0][0]), std::move(res[1][0])};
}

}  // namespace memsde
