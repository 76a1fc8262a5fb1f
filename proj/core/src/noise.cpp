#include "memsde/noise.hpp"

#include "memsde/error.hpp"

#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <optional>

namespace memsde {

namespace {

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

__extension__ typedef unsigned __int128 u128;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  const u128 p = static_cast<u128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

inline std::uint64_t counter_word2(Purpose purpose, std::uint64_t sub) {
  return static_cast<std::uint64_t>(purpose) | (sub << 8);
}

// Feeds one fixed primary word to the ziggurat, then words of a per-normal overflow
// stream when the ziggurat rejects.
class NormalEngine {
 public:
  using result_type = std::uint64_t;
  NormalEngine(std::uint64_t primary, std::uint64_t seed, std::uint64_t stream, std::uint64_t k)
      : primary_(primary), overflow_(seed, stream, Purpose::Brownian, 1, k) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (!used_) {
      used_ = true;
      return primary_;
    }
    return overflow_();
  }

 private:
  std::uint64_t primary_;
  bool used_ = false;
  CounterStream overflow_;
};

}  // namespace

Philox4x64::Counter Philox4x64::block(Counter c, Key k) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

CounterStream::CounterStream(std::uint64_t seed, std::uint64_t stream, Purpose purpose,
                             std::uint64_t sub, std::uint64_t start) noexcept
    : key_{seed, 0}, ctr_{start, stream, counter_word2(purpose, sub), 0} {}

CounterStream::result_type CounterStream::operator()() noexcept {
  if (pos_ == 4) {
    buf_ = Philox4x64::block(ctr_, key_);
    ++ctr_[3];
    pos_ = 0;
  }
  return buf_[pos_++];
}

double CounterStream::uniform() noexcept {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double CounterStream::normal() {
  boost::random::normal_distribution<double> dist;
  return dist(*this);
}

void standard_normals(std::uint64_t seed, std::uint64_t stream, std::uint64_t first,
                      std::size_t count, double* out) {
  boost::random::normal_distribution<double> dist;
  const Philox4x64::Key key{seed, 0};
  const std::uint64_t w2 = counter_word2(Purpose::Brownian, 0);
  std::uint64_t k = first;
  std::size_t i = 0;
  while (i < count) {
    const std::uint64_t blk = k >> 2;
    const auto words = Philox4x64::block({blk, stream, w2, 0}, key);
    for (unsigned lane = static_cast<unsigned>(k & 3u); lane < 4 && i < count; ++lane, ++k, ++i) {
      NormalEngine eng(words[lane], seed, stream, k);
      out[i] = dist(eng);
    }
  }
}

void NoisePlan::validate() const {
  require(m >= 1, Errc::ConfigError, "noise plan: m must be >= 1");
  require(tau_fine > 0.0 && std::isfinite(tau_fine), Errc::ConfigError, "noise plan: tau_fine must be positive");
  require(refinement >= 1 && (refinement & (refinement - 1)) == 0, Errc::ConfigError,
          "noise plan: refinement must be a power of two");
  require(n_steps_fine >= 1 && n_steps_fine % refinement == 0, Errc::ConfigError,
          "noise plan: n_steps_fine must be a positive multiple of refinement");
}

SampleMatrix brownian_increments(const NoisePlan& plan, std::uint64_t trajectory_id, NoiseLevel level) {
  plan.validate();
  const auto n = static_cast<std::size_t>(plan.n_steps_fine);
  const std::size_t m = plan.m;
  const double scale = std::sqrt(plan.tau_fine);
  SampleMatrix fine(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  standard_normals(plan.seed, trajectory_id, 0, n * m, fine.data());
  for (Eigen::Index i = 0; i < fine.size(); ++i) fine.data()[i] = scale * fine.data()[i];
  if (level == NoiseLevel::Fine) return fine;

  const auto r = static_cast<std::size_t>(plan.refinement);
  SampleMatrix coarse = SampleMatrix::Zero(static_cast<Eigen::Index>(n / r), static_cast<Eigen::Index>(m));
  for (std::size_t b = 0; b < n / r; ++b)
    for (std::size_t s = 0; s < r; ++s)
      for (std::size_t j = 0; j < m; ++j) coarse(b, j) += fine(b * r + s, j);
  return coarse;
}

std::uint64_t uniform_index(CounterStream& g, std::uint64_t n) {
  // Rejection on the top bits to avoid modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  for (;;) {
    const std::uint64_t w = g();
    if (w < limit) return w % n;
  }
}

}  // namespace memsde
