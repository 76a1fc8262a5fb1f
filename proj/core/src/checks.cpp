#include "memsde/checks.hpp"

#include "memsde/error.hpp"
#include "memsde/noise.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace memsde {

std::string_view to_string(AssumptionId id) {
  switch (id) {
    case AssumptionId::A1_mon: return "A1_mon";
    case AssumptionId::A1_coe: return "A1_coe";
    case AssumptionId::A3_ellipticity: return "A3_ellipticity";
    case AssumptionId::A4: return "A4";
    case AssumptionId::A5_mon_star: return "A5_mon_star";
    case AssumptionId::A5_s_tau: return "A5_s_tau";
  }
  return "unknown";
}

SampleMatrix sample_ball(std::size_t d, std::size_t n, double radius, std::uint64_t seed) {
  require(d >= 1, Errc::InvalidArgument, "sample_ball: d must be >= 1");
  require(radius > 0.0, Errc::InvalidArgument, "sample_ball: radius must be positive");
  SampleMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    CounterStream g(seed, i, Purpose::Sampling);
    double s;
    do {
      s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        out(i, k) = g.normal();
        s += out(i, k) * out(i, k);
      }
    } while (s == 0.0);
    const double r = radius * std::pow(g.uniform(), 1.0 / static_cast<double>(d)) / std::sqrt(s);
    for (std::size_t k = 0; k < d; ++k) out(i, k) *= r;
  }
  return out;
}

SampleMatrix coarse_grid(std::size_t d, double radius, std::size_t radii) {
  require(d >= 1 && radii >= 1, Errc::InvalidArgument, "coarse_grid: d and radii must be >= 1");
  const std::size_t n_dirs = 2 * d + (d > 1 ? 2 : 0);
  SampleMatrix out = SampleMatrix::Zero(static_cast<Eigen::Index>(1 + n_dirs * radii),
                                        static_cast<Eigen::Index>(d));
  std::size_t row = 1;
  const double diag = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t k = 1; k <= radii; ++k) {
    const double r = radius * static_cast<double>(k) / static_cast<double>(radii);
    for (std::size_t i = 0; i < d; ++i) {
      out(row++, i) = r;
      out(row++, i) = -r;
    }
    if (d > 1) {
      for (std::size_t i = 0; i < d; ++i) out(row, i) = r * diag;
      ++row;
      for (std::size_t i = 0; i < d; ++i) out(row, i) = -r * diag;
      ++row;
    }
  }
  return out;
}

namespace {

// Random points followed by the coarse grid.
SampleMatrix check_points(std::size_t d, std::size_t n, double radius, std::uint64_t seed) {
  require(n >= 1, Errc::InvalidArgument, "n_points must be >= 1");
  require(radius > 0.0 && std::isfinite(radius), Errc::InvalidArgument, "radius must be positive");
  const SampleMatrix rnd = sample_ball(d, n, radius, seed);
  const SampleMatrix grid = coarse_grid(d, radius);
  SampleMatrix all(rnd.rows() + grid.rows(), static_cast<Eigen::Index>(d));
  all << rnd, grid;
  return all;
}

struct Tally {
  std::size_t n = 0;
  std::size_t violations = 0;
  double worst = std::numeric_limits<double>::infinity();

  // rhs − lhs with a relative rounding allowance.
  void add(double lhs, double rhs) {
    ++n;
    const double margin = rhs - lhs;
    worst = std::min(worst, margin);
    if (margin < -1e-12 * (1.0 + std::abs(lhs) + std::abs(rhs))) ++violations;
  }
};

SampledCheckReport make_report(AssumptionId id, std::string inequality, const Tally& t, double radius) {
  SampledCheckReport r;
  r.assumption_id = id;
  r.inequality = std::move(inequality);
  r.n_points = t.n;
  r.n_violations = t.violations;
  r.worst_margin = t.violations == 0 ? std::max(t.worst, 0.0) : t.worst;
  r.sampled_radius = radius;
  return r;
}

void eval_coefficients(const SdeProblem& p, const double* x, Vec& b, Mat& s) {
  p.coefficients().drift(x, b.data());
  p.coefficients().diffusion(x, s.data());
  if (!all_finite(b.data(), p.d()) || !all_finite(s.data(), p.d() * p.m()))
    fail(Errc::NonFiniteEvaluation, "coefficients are not finite at a sampled point");
}

double dot(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) s += a[i] * b[i];
  return s;
}

double frobenius_sq(const Mat& a) { return a.squaredNorm(); }

// Existential-constant check: ratio(x) ≤ C for some C. Points are binned into radial shells;
// the shell maxima are fitted in log-log coordinates over the outer half of the ball.
class RatioFit {
 public:
  explicit RatioFit(double radius) : radius_(radius), shell_max_(kShells, 0.0) {}

  void add(double r, double numerator, double denominator) {
    double q;
    if (numerator == 0.0) q = 0.0;
    else if (denominator == 0.0) q = std::numeric_limits<double>::infinity();
    else q = numerator / denominator;
    if (!std::isfinite(q)) non_finite_ = true;
    const auto k = std::min<std::size_t>(kShells - 1, static_cast<std::size_t>(kShells * r / radius_));
    shell_max_[k] = std::max(shell_max_[k], q);
    samples_.push_back({r, q});
  }

  SampledCheckReport report(std::string inequality) const {
    SampledCheckReport rep;
    rep.assumption_id = AssumptionId::A4;
    rep.inequality = std::move(inequality);
    rep.n_points = samples_.size();
    rep.sampled_radius = radius_;
    double cmax = 0.0;
    for (const auto& s : samples_) cmax = std::max(cmax, s.q);
    rep.fitted_constant = cmax;

    if (non_finite_) {
      rep.worst_margin = -std::numeric_limits<double>::infinity();
      rep.growth_slope = std::numeric_limits<double>::infinity();
      for (const auto& s : samples_)
        if (!std::isfinite(s.q)) ++rep.n_violations;
      return rep;
    }

    // Least-squares slope of log(max ratio) against log(shell mid radius), outer half.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    bool increasing = true;
    double prev = -1.0;
    for (std::size_t k = kShells / 2; k < kShells; ++k) {
      const double v = shell_max_[k];
      if (prev >= 0.0 && !(v > prev)) increasing = false;
      prev = v;
      if (v <= 0.0) continue;
      const double lx = std::log(radius_ * (static_cast<double>(k) + 0.5) / kShells);
      const double ly = std::log(v);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++n;
    }
    double slope = 0.0;
    if (n >= 2) {
      const double den = n * sxx - sx * sx;
      if (den > 0.0) slope = (n * sxy - sx * sy) / den;
    } else {
      increasing = false;
    }
    rep.growth_slope = slope;
    const bool flagged = increasing && slope > kSlopeTolerance;
    if (flagged) {
      double inner = 0.0;
      for (std::size_t k = 0; k < kShells / 2; ++k) inner = std::max(inner, shell_max_[k]);
      const double outer_lo = radius_ * (kShells - 1) / kShells;
      for (const auto& s : samples_)
        if (s.r >= outer_lo && s.q > inner) ++rep.n_violations;
      rep.n_violations = std::max<std::size_t>(rep.n_violations, 1);
      rep.worst_margin = kSlopeTolerance - slope;
    } else {
      rep.worst_margin = std::max(kSlopeTolerance - slope, 0.0);
    }
    return rep;
  }

 private:
  static constexpr std::size_t kShells = 8;
  static constexpr double kSlopeTolerance = 0.5;
  struct Sample {
    double r;
    double q;
  };
  double radius_;
  std::vector<double> shell_max_;
  std::vector<Sample> samples_;
  bool non_finite_ = false;
};

}  // namespace

SampledCheckReport check_monotonicity(const SdeProblem& p, std::size_t n_points, double radius,
                                      std::uint64_t seed) {
  const std::size_t d = p.d(), m = p.m();
  const SampleMatrix xs = sample_ball(d, 2 * n_points, radius, seed);
  const SampleMatrix grid = coarse_grid(d, radius);
  const double w = (2.0 * p.constants().p_star - 1.0) / 2.0;
  const double L1 = p.constants().L1;
  Vec bx(d), by(d);
  Mat sx(d, m), sy(d, m);
  Tally t;
  auto pair = [&](const double* x, const double* y) {
    eval_coefficients(p, x, bx, sx);
    eval_coefficients(p, y, by, sy);
    double inner = 0.0, dist2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      inner += (x[i] - y[i]) * (bx[i] - by[i]);
      dist2 += (x[i] - y[i]) * (x[i] - y[i]);
    }
    t.add(inner + w * frobenius_sq(sx - sy), L1 * dist2);
  };
  for (std::size_t i = 0; i < n_points; ++i) pair(xs.row(2 * i).data(), xs.row(2 * i + 1).data());
  const auto g = static_cast<std::size_t>(grid.rows());
  for (std::size_t i = 0; i < g; ++i) pair(grid.row(i).data(), grid.row((i + 1) % g).data());
  return make_report(AssumptionId::A1_mon,
                     "<x-y, b(x)-b(y)> + (2p*-1)/2 |s(x)-s(y)|^2 <= L1 |x-y|^2", t, radius);
}

SampledCheckReport check_coercivity(const SdeProblem& p, std::size_t n_points, double radius,
                                    std::uint64_t seed) {
  const std::size_t d = p.d(), m = p.m();
  const SampleMatrix xs = check_points(d, n_points, radius, seed);
  const auto& c = p.constants();
  const double w = c.p_star * (2.0 * c.p_star - 1.0) / 2.0;
  Vec b(d);
  Mat s(d, m);
  Tally t;
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const double* x = xs.row(i).data();
    eval_coefficients(p, x, b, s);
    const double r = norm(x, d);
    t.add(dot(x, b.data(), d) + w * frobenius_sq(s), c.L2 - c.L3 * std::pow(r, p.gamma() + 1.0));
  }
  return make_report(AssumptionId::A1_coe,
                     "<x, b(x)> + p*(2p*-1)/2 |s(x)|^2 <= L2 - L3 |x|^(gamma+1)", t, radius);
}

SampledCheckReport check_ellipticity(const SdeProblem& p, std::size_t n_points, double radius,
                                     std::uint64_t seed) {
  const std::size_t d = p.d(), m = p.m();
  const SampleMatrix xs = check_points(d, n_points, radius, seed);
  const double l0 = p.constants().lambda0;
  const double lo = l0 * l0, hi = 1.0 / (l0 * l0);
  Vec b(d);
  Mat s(d, m);
  Tally t;
  Eigen::SelfAdjointEigenSolver<Mat> eig;
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    eval_coefficients(p, xs.row(i).data(), b, s);
    eig.compute(s * s.transpose(), Eigen::EigenvaluesOnly);
    const double emin = eig.eigenvalues().minCoeff();
    const double emax = eig.eigenvalues().maxCoeff();
    // Both sides folded into one margin: min(emin − λ0², λ0⁻² − emax).
    if (emin - lo <= hi - emax) t.add(lo, emin);
    else t.add(emax, hi);
  }
  return make_report(AssumptionId::A3_ellipticity, "lambda0^-2 I >= s s^T >= lambda0^2 I", t, radius);
}

std::vector<SampledCheckReport> check_scheme_conditions(const SdeProblem& p, const SchemeSpec& s,
                                                        double tau, std::size_t n_points,
                                                        double radius, std::uint64_t seed) {
  const auto& c = p.constants();
  require(tau > 0.0 && tau < c.tau_max(), Errc::InvalidArgument,
          "check_scheme_conditions: tau must lie in (0, tau_max)");
  const std::size_t d = p.d(), m = p.m();
  const SampleMatrix xs = check_points(d, n_points, radius, seed);

  RatioFit drift_ratio(radius), diff_ratio(radius), consistency(radius), displacement(radius);
  Tally norm_tally, mon_star, s_tau;
  const double binom = c.p_star * (2.0 * c.p_star - 1.0);  // binom(2p*, 2)
  Vec b(d), bp(d);
  Mat sg(d, m), sp(d, m);

  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const Vec x = xs.row(i).transpose();
    eval_coefficients(p, x.data(), b, sg);
    const Vec px = s.modification(x, tau);
    const Vec bt = s.modified_drift(p, px, tau);
    const Mat st = s.modified_diffusion(p, px, tau);
    eval_coefficients(p, px.data(), bp, sp);
    if (!all_finite(px.data(), d) || !all_finite(bt.data(), d) || !all_finite(st.data(), d * m))
      fail(Errc::NonFiniteEvaluation, "modified coefficients are not finite at a sampled point");

    const double r = norm(x);
    const double rp = norm(px);
    drift_ratio.add(r, norm(bt), norm(b));
    double worst_col = 0.0;
    bool inf_col = false;
    for (std::size_t j = 0; j < m; ++j) {
      const double num = st.col(static_cast<Eigen::Index>(j)).norm();
      const double den = sg.col(static_cast<Eigen::Index>(j)).norm();
      if (num == 0.0) continue;
      if (den == 0.0) inf_col = true;
      else worst_col = std::max(worst_col, num / den);
    }
    diff_ratio.add(r, inf_col ? 1.0 : worst_col, inf_col ? 0.0 : 1.0);

    double delta = norm(Vec(bt - bp));
    for (std::size_t j = 0; j < m; ++j)
      delta += (st.col(static_cast<Eigen::Index>(j)) - sp.col(static_cast<Eigen::Index>(j))).norm();
    consistency.add(r, delta, tau * (1.0 + std::pow(r, s.alpha1())));

    // |P(x)| ≤ |x| is exact: no rounding allowance.
    ++norm_tally.n;
    norm_tally.worst = std::min(norm_tally.worst, r - rp);
    if (rp > r) ++norm_tally.violations;

    displacement.add(r, norm(Vec(px - x)), tau * tau * std::pow(r, s.alpha2()));

    double sig2 = 0.0;
    for (std::size_t j = 0; j < m; ++j) sig2 += st.col(static_cast<Eigen::Index>(j)).squaredNorm();
    const double bt2 = bt.squaredNorm();
    mon_star.add(2.0 * dot(px.data(), bt.data(), d) + binom * sig2 + tau * bt2, c.K3 - c.K4 * rp * rp);
    s_tau.add(std::sqrt(tau) * sig2, c.K5 + c.K6 * std::pow(rp, s.alpha3()));
  }

  std::vector<SampledCheckReport> out;
  out.push_back(drift_ratio.report("|b_tau(P(x))| <= C |b(x)|"));
  out.push_back(diff_ratio.report("|s_j,tau(P(x))| <= C |s_j(x)|"));
  out.push_back(consistency.report(
      "|b_tau(P(x)) - b(P(x))| + sum_j |s_j,tau(P(x)) - s_j(P(x))| <= C tau (1 + |x|^alpha1)"));
  out.push_back(make_report(AssumptionId::A4, "|P(x)| <= |x|", norm_tally, radius));
  out.push_back(displacement.report("|P(x) - x| <= C tau^2 |x|^alpha2"));
  out.push_back(make_report(AssumptionId::A5_mon_star,
                            "2<P(x), b_tau> + C(2p*,2) sum_j |s_j,tau|^2 + tau |b_tau|^2 <= K3 - K4 |P(x)|^2",
                            mon_star, radius));
  out.push_back(make_report(AssumptionId::A5_s_tau,
                            "sqrt(tau) sum_j |s_j,tau|^2 <= K5 + K6 |P(x)|^alpha3", s_tau, radius));
  return out;
}

double drift_jacobian_error(const SdeProblem& p, std::size_t n_points, double radius,
                            std::uint64_t seed) {
  require(p.has_jacobians(), Errc::InvalidArgument, "problem has no Jacobians");
  const std::size_t d = p.d();
  const SampleMatrix xs = sample_ball(d, n_points, radius, seed);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const Vec x = xs.row(i).transpose();
    const Mat j = p.drift_jacobian(x);
    Mat fd(d, d);
    for (std::size_t k = 0; k < d; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
      Vec xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      fd.col(static_cast<Eigen::Index>(k)) = (p.drift(xp) - p.drift(xm)) / (xp[k] - xm[k]);
    }
    worst = std::max(worst, (j - fd).norm() / std::max(j.norm(), 1.0));
  }
  return worst;
}

}  // namespace memsde
