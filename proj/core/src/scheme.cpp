#include "memsde/scheme.hpp"

#include "memsde/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace memsde {

std::string_view to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::EM: return "em";
    case SchemeKind::TEM: return "tem";
    case SchemeKind::PEM: return "pem";
    case SchemeKind::CustomMEM: return "custom";
  }
  return "unknown";
}

std::optional<SchemeKind> parse_scheme_kind(std::string_view name) {
  if (name == "em") return SchemeKind::EM;
  if (name == "tem") return SchemeKind::TEM;
  if (name == "pem") return SchemeKind::PEM;
  if (name == "custom") return SchemeKind::CustomMEM;
  return std::nullopt;
}

bool StepState::finite() const { return all_finite(y.data(), static_cast<std::size_t>(y.size())); }

// ---------------------------------------------------------------------------------------
// Taming and projection primitives

namespace {

constexpr std::size_t kChunkLimit = 256;

// |x|^{4(γ−1)} from |x|², using repeated multiplication when 2(γ−1) is a small integer.
double taming_power(double norm_sq, double gamma) {
  const double e = 2.0 * (gamma - 1.0);
  if (e == std::floor(e) && e >= 0.0 && e <= 16.0) {
    double r = 1.0;
    double base = norm_sq;
    for (auto k = static_cast<unsigned>(e); k != 0; k >>= 1) {
      if (k & 1u) r *= base;
      base *= base;
    }
    return r;
  }
  return std::pow(norm_sq, e);
}

// f[k] = 1 / taming_denominator(|y_k|², τ, γ), written as flat loops the compiler can
// vectorize. Gives the same bits as the scalar path.
void taming_factors(const double* ys, std::size_t count, std::size_t d, double tau, double gamma, double* f) {
  if (d == 1) {
    for (std::size_t k = 0; k < count; ++k) f[k] = ys[k] * ys[k];
  } else {
    for (std::size_t k = 0; k < count; ++k) f[k] = squared_norm(ys + k * d, d);
  }
  const double e = 2.0 * (gamma - 1.0);
  if (!(e == std::floor(e) && e >= 0.0 && e <= 16.0)) {
    for (std::size_t k = 0; k < count; ++k) f[k] = 1.0 / taming_denominator(f[k], tau, gamma);
    return;
  }
  // Same multiplication sequence as taming_power, one bit of the exponent at a time.
  double r[kChunkLimit];
  double base[kChunkLimit];
  for (std::size_t k0 = 0; k0 < count; k0 += kChunkLimit) {
    const std::size_t n = std::min(kChunkLimit, count - k0);
    double* fk = f + k0;
    for (std::size_t k = 0; k < n; ++k) {
      r[k] = 1.0;
      base[k] = fk[k];
    }
    for (auto bits = static_cast<unsigned>(e); bits != 0; bits >>= 1) {
      if (bits & 1u)
        for (std::size_t k = 0; k < n; ++k) r[k] *= base[k];
      for (std::size_t k = 0; k < n; ++k) base[k] *= base[k];
    }
    bool overflow = false;
    for (std::size_t k = 0; k < n; ++k) {
      const double z = tau * r[k];
      overflow |= !(z < 1e300);
      r[k] = 1.0 / std::sqrt(std::sqrt(1.0 + z));
    }
    if (overflow) {
      for (std::size_t k = 0; k < n; ++k) r[k] = 1.0 / taming_denominator(fk[k], tau, gamma);
    }
    std::copy(r, r + n, fk);
  }
}

// Norm that survives overflow of the sum of squares.
double robust_norm(const double* x, std::size_t d) {
  const double n = norm(x, d);
  if (std::isfinite(n)) return n;
  double amax = 0.0;
  for (std::size_t i = 0; i < d; ++i) amax = std::max(amax, std::abs(x[i]));
  if (!std::isfinite(amax)) return n;
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double r = x[i] / amax;
    s += r * r;
  }
  return amax * std::sqrt(s);
}

}  // namespace

double taming_denominator(double norm_sq, double tau, double gamma) {
  const double u = taming_power(norm_sq, gamma);
  const double z = tau * u;
  if (z < 1e300) return std::sqrt(std::sqrt(1.0 + z));
  // 1 + z rounds to z here, so D = (τ |x|^{4(γ−1)})^{1/4} evaluated through logs.
  return std::exp(0.25 * (std::log(tau) + 2.0 * (gamma - 1.0) * std::log(norm_sq)));
}

Vec tame_drift(const SdeProblem& p, const Vec& x, double tau) {
  require(tau > 0.0, Errc::InvalidArgument, "tame_drift: tau must be positive");
  Vec b = p.drift(x);
  require(all_finite(b.data(), p.d()), Errc::NonFiniteEvaluation, "tame_drift: drift is not finite");
  const double f = 1.0 / taming_denominator(squared_norm(x.data(), p.d()), tau, p.gamma());
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = b[i] * f;
  return b;
}

Mat tame_diffusion(const SdeProblem& p, const Vec& x, double tau) {
  require(tau > 0.0, Errc::InvalidArgument, "tame_diffusion: tau must be positive");
  Mat s = p.diffusion(x);
  require(all_finite(s.data(), p.d() * p.m()), Errc::NonFiniteEvaluation,
          "tame_diffusion: diffusion is not finite");
  const double f = 1.0 / taming_denominator(squared_norm(x.data(), p.d()), tau, p.gamma());
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = s.data()[i] * f;
  return s;
}

double projection_radius(double tau, double gamma) {
  require(tau > 0.0, Errc::InvalidArgument, "projection_radius: tau must be positive");
  require(gamma > 1.0, Errc::InvalidArgument, "projection_radius: gamma must be > 1");
  return std::pow(tau, -1.0 / (2.0 * gamma));
}

void project_inplace(double* x, std::size_t d, double radius) {
  const double n = robust_norm(x, d);
  if (!(n > radius)) return;  // inside the ball, zero, or NaN
  if (std::isinf(n)) {
    // An infinite component: keep its direction, drop the others.
    for (std::size_t i = 0; i < d; ++i)
      x[i] = std::isinf(x[i]) ? std::copysign(1.0, x[i]) : 0.0;
    double k = 0.0;
    for (std::size_t i = 0; i < d; ++i) k += std::abs(x[i]);
    const double s = radius / std::sqrt(k);
    for (std::size_t i = 0; i < d; ++i) x[i] *= s;
  } else {
    double s = radius / n;
    double buf[64];
    std::vector<double> heap;
    double* z = buf;
    if (d > 64) {
      heap.resize(d);
      z = heap.data();
    }
    for (;;) {
      for (std::size_t i = 0; i < d; ++i) z[i] = s * x[i];
      if (norm(z, d) <= radius) break;
      s = std::nextafter(s, 0.0);
    }
    std::copy(z, z + d, x);
  }
  // Final guard for the infinite-component branch.
  while (norm(x, d) > radius)
    for (std::size_t i = 0; i < d; ++i) x[i] = std::nextafter(x[i], 0.0);
}

Vec project(const Vec& x, double tau, double gamma) {
  Vec out = x;
  project_inplace(out.data(), static_cast<std::size_t>(out.size()), projection_radius(tau, gamma));
  return out;
}

// ---------------------------------------------------------------------------------------
// SchemeSpec

SchemeSpec::SchemeSpec(SchemeKind kind, double gamma, double alpha1, double alpha2, double alpha3)
    : kind_(kind), gamma_(gamma), alpha1_(alpha1), alpha2_(alpha2), alpha3_(alpha3) {
  require(alpha1 >= 1.0, Errc::InvalidArgument, "alpha1 must be >= 1");
  require(alpha2 >= 2.0, Errc::InvalidArgument, "alpha2 must be >= 2");
  require(alpha3 < 2.0, Errc::InvalidArgument, "alpha3 must be < 2");
}

SchemeSpec SchemeSpec::em() { return SchemeSpec(SchemeKind::EM, 0.0, 1.0, 2.0, 1.0); }

SchemeSpec SchemeSpec::tem(double gamma) {
  require(gamma > 1.0, Errc::InvalidArgument, "TEM requires gamma > 1");
  return SchemeSpec(SchemeKind::TEM, gamma, 5.0 * gamma - 4.0, 2.0, 3.0 - gamma);
}

SchemeSpec SchemeSpec::pem(double gamma) {
  require(gamma > 1.0, Errc::InvalidArgument, "PEM requires gamma > 1");
  return SchemeSpec(SchemeKind::PEM, gamma, 1.0, 4.0 * gamma + 1.0, 1.0);
}

SchemeSpec SchemeSpec::custom(CustomScheme functions, double alpha1, double alpha2, double alpha3) {
  require(static_cast<bool>(functions.modification) && static_cast<bool>(functions.modified_drift) &&
              static_cast<bool>(functions.modified_diffusion),
          Errc::InvalidArgument, "custom scheme requires all three callables");
  SchemeSpec s(SchemeKind::CustomMEM, 0.0, alpha1, alpha2, alpha3);
  s.custom_ = std::make_shared<const CustomScheme>(std::move(functions));
  return s;
}

SchemeSpec SchemeSpec::for_problem(SchemeKind kind, const SdeProblem& p) {
  switch (kind) {
    case SchemeKind::EM: return em();
    case SchemeKind::TEM: return tem(p.gamma());
    case SchemeKind::PEM: return pem(p.gamma());
    case SchemeKind::CustomMEM: break;
  }
  fail(Errc::InvalidArgument, "custom schemes must be built with SchemeSpec::custom");
}

SchemeSpec SchemeSpec::with_exponents(double alpha1, double alpha2, double alpha3) const {
  SchemeSpec s(kind_, gamma_, alpha1, alpha2, alpha3);
  s.custom_ = custom_;
  return s;
}

Vec SchemeSpec::modification(const Vec& x, double tau) const {
  switch (kind_) {
    case SchemeKind::EM:
    case SchemeKind::TEM: return x;
    case SchemeKind::PEM: return project(x, tau, gamma_);
    case SchemeKind::CustomMEM: return custom_->modification(x, tau);
  }
  return x;
}

Vec SchemeSpec::modified_drift(const SdeProblem& p, const Vec& x, double tau) const {
  switch (kind_) {
    case SchemeKind::TEM: return tame_drift(p, x, tau);
    case SchemeKind::CustomMEM: return custom_->modified_drift(x, tau);
    default: return p.drift(x);
  }
}

Mat SchemeSpec::modified_diffusion(const SdeProblem& p, const Vec& x, double tau) const {
  switch (kind_) {
    case SchemeKind::TEM: return tame_diffusion(p, x, tau);
    case SchemeKind::CustomMEM: return custom_->modified_diffusion(x, tau);
    default: return p.diffusion(x);
  }
}

void SchemeSpec::advance(const SdeProblem& p, double tau, double dt, std::size_t count, double* ys,
                         const double* ws, StepWorkspace& scratch) const {
  const std::size_t d = p.d();
  const std::size_t m = p.m();
  const Coefficients& c = p.coefficients();

  if (kind_ == SchemeKind::CustomMEM) {
    for (std::size_t k = 0; k < count; ++k) {
      Eigen::Map<Vec> y(ys + k * d, static_cast<Eigen::Index>(d));
      const Vec z = custom_->modification(y, tau);
      const Vec b = custom_->modified_drift(z, tau);
      const Mat s = custom_->modified_diffusion(z, tau);
      for (std::size_t i = 0; i < d; ++i) {
        double v = z[i] + b[i] * dt;
        for (std::size_t j = 0; j < m; ++j) v += s(i, j) * ws[k * m + j];
        y[i] = v;
      }
    }
    return;
  }

  if (kind_ == SchemeKind::PEM) {
    const double radius = projection_radius(tau, gamma_);
    for (std::size_t k = 0; k < count; ++k) project_inplace(ys + k * d, d, radius);
  }

  scratch.drift.resize(count * d);
  scratch.factor.resize(count);
  c.drift_batch(count, ys, scratch.drift.data());
  double* f = scratch.factor.data();
  if (kind_ == SchemeKind::TEM) {
    taming_factors(ys, count, d, tau, gamma_, f);
  } else {
    std::fill(f, f + count, 1.0);
  }
  const double* b = scratch.drift.data();

  if (c.diagonal_diffusion()) {
    scratch.diffusion.resize(count * d);
    c.diffusion_diagonal_batch(count, ys, scratch.diffusion.data());
    const double* s = scratch.diffusion.data();
    for (std::size_t k = 0; k < count; ++k) {
      const double fk = f[k];
      for (std::size_t i = 0; i < d; ++i) {
        const std::size_t q = k * d + i;
        ys[q] = ys[q] + (b[q] * fk) * dt + (s[q] * fk) * ws[q];
      }
    }
  } else {
    scratch.diffusion.resize(count * d * m);
    c.diffusion_batch(count, ys, scratch.diffusion.data());
    const double* s = scratch.diffusion.data();
    for (std::size_t k = 0; k < count; ++k) {
      const double fk = f[k];
      const double* sk = s + k * d * m;
      const double* wk = ws + k * m;
      for (std::size_t i = 0; i < d; ++i) {
        const std::size_t q = k * d + i;
        double v = ys[q] + (b[q] * fk) * dt;
        for (std::size_t j = 0; j < m; ++j) v += (sk[j * d + i] * fk) * wk[j];
        ys[q] = v;
      }
    }
  }
}

// ---------------------------------------------------------------------------------------
// Single-trajectory API

namespace {

Vec advance_one(const SdeProblem& p, const SchemeSpec& s, const Vec& y, const Vec& w, double tau,
                double dt) {
  require(static_cast<std::size_t>(y.size()) == p.d(), Errc::DimensionMismatch, "state has wrong dimension");
  require(static_cast<std::size_t>(w.size()) == p.m(), Errc::DimensionMismatch, "increment has wrong dimension");
  require(tau > 0.0, Errc::InvalidArgument, "tau must be positive");
  Vec out = y;
  StepWorkspace ws;
  s.advance(p, tau, dt, 1, out.data(), w.data(), ws);
  return out;
}

}  // namespace

StepState mem_step(const SdeProblem& p, const SchemeSpec& s, const StepState& state, const Vec& dW,
                   double tau) {
  StepState next;
  next.y = advance_one(p, s, state.y, dW, tau, tau);
  next.n = state.n + 1;
  next.t = static_cast<double>(next.n) * tau;
  return next;
}

Vec interpolate_step(const SdeProblem& p, const SchemeSpec& s, const StepState& state,
                     const Vec& w_path_increment, double dt_within, double tau) {
  if (!(dt_within >= 0.0 && dt_within <= tau))
    fail(Errc::OutOfStep, "dt_within must lie in [0, tau]");
  return advance_one(p, s, state.y, w_path_increment, tau, dt_within);
}

}  // namespace memsde
