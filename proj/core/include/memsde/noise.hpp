#pragma once

#include "memsde/types.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

namespace memsde {

/// Philox4x64 with 10 rounds (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
struct Philox4x64 {
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;
  static Counter block(Counter ctr, Key key) noexcept;
};

/// Independent stream families. The purpose tag is folded into the counter so that streams
/// for different uses never overlap.
enum class Purpose : std::uint64_t {
  Brownian = 1,
  InitialState = 2,
  Sampling = 3,
  Bootstrap = 4,
  Directions = 5,
  Subsample = 6,
};

/// Sequential 64-bit words from the counter stream (seed, stream, purpose, sub).
/// Satisfies UniformRandomBitGenerator.
class CounterStream {
 public:
  using result_type = std::uint64_t;

  CounterStream(std::uint64_t seed, std::uint64_t stream, Purpose purpose, std::uint64_t sub = 0,
                std::uint64_t start = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double normal();

 private:
  Philox4x64::Key key_;
  Philox4x64::Counter ctr_;
  Philox4x64::Counter buf_{};
  unsigned pos_ = 4;
};

/// Standard normals Z_k, k = first..first+count-1, of the Brownian stream of one trajectory.
/// Z_k depends only on (seed, stream, k).
void standard_normals(std::uint64_t seed, std::uint64_t stream, std::uint64_t first,
                      std::size_t count, double* out);

/// Fine-grid Brownian increments and their coarse block sums.
struct NoisePlan {
  std::uint64_t seed = 0;
  std::size_t m = 1;
  double tau_fine = 0.0;
  std::int64_t refinement = 1;
  std::int64_t n_steps_fine = 0;

  /// Throws ConfigError unless m ≥ 1, tau_fine > 0, refinement a power of two and
  /// n_steps_fine a positive multiple of refinement.
  void validate() const;
};

enum class NoiseLevel { Fine, Coarse };

/// Fine: n_steps_fine increments sqrt(τ_fine)·Z. Coarse: sums over consecutive blocks of
/// `refinement` fine increments, accumulated in order from 0.0, as the simulator does.
/// One row per increment, m columns.
SampleMatrix brownian_increments(const NoisePlan& plan, std::uint64_t trajectory_id, NoiseLevel level);

/// Simple seeded draws for utilities (sampling, bootstrap, directions).
std::uint64_t uniform_index(CounterStream& g, std::uint64_t n);

}  // namespace memsde
