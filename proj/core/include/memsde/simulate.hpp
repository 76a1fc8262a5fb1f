#pragma once

#include "memsde/noise.hpp"
#include "memsde/problem.hpp"
#include "memsde/scheme.hpp"
#include "memsde/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace memsde {

/// Point mass or diagonal Gaussian initial law.
class InitialCondition {
 public:
  static InitialCondition point(Vec x0);
  static InitialCondition gaussian(GaussianLaw law);

  bool is_point() const noexcept { return !law_.has_value(); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(mean_.size()); }
  const Vec& mean() const noexcept { return mean_; }
  const std::optional<GaussianLaw>& law() const noexcept { return law_; }

  /// Initial state of one trajectory, drawn from its own InitialState stream.
  void sample(std::uint64_t seed, std::uint64_t trajectory_id, double* out) const;

 private:
  Vec mean_;
  std::optional<GaussianLaw> law_;
};

struct EnsembleMeta {
  std::string problem;
  std::string scheme;
  double tau = 0.0;
  double T = 0.0;
  std::uint64_t seed = 0;
};

/// Terminal states of M trajectories. Rows of diverged trajectories hold the non-finite
/// state they ended in.
struct Ensemble {
  SampleMatrix samples;
  std::vector<std::optional<std::int64_t>> diverged;
  EnsembleMeta meta;

  std::size_t size() const noexcept { return diverged.size(); }
  std::size_t n_diverged() const;
  double diverged_fraction() const;
  /// Rows of the trajectories that stayed finite, in trajectory order.
  SampleMatrix finite_samples() const;
};

/// Called after every step of every level, and once at step 0, with the states of one
/// chunk of consecutive trajectories.
struct StepEvent {
  std::size_t chunk;
  std::size_t first_trajectory;  // index within this run, before the offset
  std::size_t count;
  std::size_t level;
  std::int64_t step;
  const double* states;  // count × d, row per trajectory
};
using StepObserver = std::function<void(const StepEvent&)>;

struct SimulationOptions {
  /// 0 means hardware concurrency.
  std::size_t workers = 1;
  StepObserver observer;
  /// Added to every trajectory id, so that a run can use streams disjoint from another's.
  std::uint64_t trajectory_offset = 0;
};

/// Trajectories are processed in chunks of this size; observers see one chunk at a time.
inline constexpr std::size_t kChunkSize = 256;
inline std::size_t chunk_count(std::size_t M) { return (M + kChunkSize - 1) / kChunkSize; }

/// One discretization driven by the shared fine noise: step τ = refinement·τ_fine.
struct LevelSpec {
  SchemeSpec scheme;
  std::int64_t refinement = 1;
};

/// Runs every level on the same Brownian paths. Coarse increments are in-order sums of
/// the fine increments. Returns ensembles indexed [level][snapshot]; snapshots are given in
/// fine steps and must be multiples of every level's refinement.
std::vector<std::vector<Ensemble>> simulate_levels(const SdeProblem& p, const std::vector<LevelSpec>& levels,
                                                   const InitialCondition& x0, const NoisePlan& plan,
                                                   std::size_t M, const std::vector<std::int64_t>& snapshot_fine_steps,
                                                   const SimulationOptions& options = {});

/// Number of steps T/τ; ConfigError unless it is a positive integer.
std::int64_t step_count(double T, double tau);

Ensemble simulate_ensemble(const SdeProblem& p, const SchemeSpec& s, const InitialCondition& x0,
                           double tau, double T, std::size_t M, std::uint64_t seed,
                           const SimulationOptions& options = {});

/// Coarse run at tau_coarse and fine run at tau_coarse/refinement on the same paths.
std::pair<Ensemble, Ensemble> simulate_coupled(const SdeProblem& p, const SchemeSpec& s_coarse,
                                               const SchemeSpec& s_fine, const InitialCondition& x0,
                                               double tau_coarse, double T, std::size_t M,
                                               std::int64_t refinement, std::uint64_t seed,
                                               const SimulationOptions& options = {});

/// X_t, η = DX_t·v and the running integral ∫⟨σ(X)⁻¹η, dW⟩.
struct FirstVariationState {
  Vec x;
  Vec eta;
  double accum = 0.0;
  bool diverged = false;
};

/// TEM path for X with the Euler step for dη = Db(X)η dt + Σ_j Dσ_j(X)η dW_j, on the
/// Brownian path of `trajectory_id`. Requires Jacobians and m = d.
FirstVariationState simulate_first_variation(const SdeProblem& p, const Vec& x0, const Vec& v,
                                             double tau, double T, std::uint64_t seed,
                                             std::uint64_t trajectory_id);

}  // namespace memsde
