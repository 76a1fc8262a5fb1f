#include "memsde/measure.hpp"

#include "memsde/assignment.hpp"
#include "memsde/error.hpp"
#include "memsde/noise.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace memsde {

EmpiricalMeasure::EmpiricalMeasure(SampleMatrix pts, std::string prov)
    : points(std::move(pts)), provenance(std::move(prov)) {
  require(points.rows() >= 1 && points.cols() >= 1, Errc::InvalidArgument, "empirical measure must be non-empty");
  require(all_finite(points.data(), static_cast<std::size_t>(points.size())), Errc::InvalidArgument,
          "empirical measure contains non-finite points");
}

EmpiricalMeasure EmpiricalMeasure::from_ensemble(const Ensemble& e) {
  if (e.size() == e.n_diverged())
    fail(Errc::EmptyAfterExclusion, "every trajectory of the ensemble diverged");
  SampleMatrix pts = e.finite_samples();
  // A trajectory can reach a finite but non-representable state only through overflow;
  // rows are finite here by construction of the divergence record.
  return EmpiricalMeasure(std::move(pts), e.meta.problem + "/" + e.meta.scheme);
}

double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 128) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

namespace {

std::vector<double> column(const EmpiricalMeasure& a) {
  return std::vector<double>(a.points.data(), a.points.data() + a.points.size());
}

void require_equal(const EmpiricalMeasure& a, const EmpiricalMeasure& b, bool one_dim) {
  if (a.d() != b.d()) fail(Errc::DimensionMismatch, "measures have different dimensions");
  if (one_dim && a.d() != 1) fail(Errc::DimensionMismatch, "estimator requires d = 1");
  if (a.size() != b.size()) fail(Errc::UnequalCounts, "measures have different sample counts");
}

double sorted_w1(std::vector<double> x, std::vector<double> y) {
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::abs(x[i] - y[i]);
  return pairwise_sum(x.data(), x.size()) / static_cast<double>(x.size());
}

std::vector<Vec> directions(std::size_t d, std::size_t k, std::uint64_t seed) {
  std::vector<Vec> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    CounterStream g(seed, i, Purpose::Directions);
    Vec u(static_cast<Eigen::Index>(d));
    double n2;
    do {
      for (std::size_t j = 0; j < d; ++j) u[j] = g.normal();
      n2 = u.squaredNorm();
    } while (n2 == 0.0);
    out.push_back(u / std::sqrt(n2));
  }
  return out;
}

std::vector<double> project(const EmpiricalMeasure& a, const Vec& u) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.d(); ++j) s += a.points(i, j) * u[j];
    out[i] = s;
  }
  return out;
}

// ∫ sqrt(var D(x)) dx for paired samples, D the empirical CDF difference.
double se_paired_1d(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  struct Event {
    double x;
    std::uint32_t id;
    bool is_a;
  };
  std::vector<Event> ev;
  ev.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    ev.push_back({a[i], static_cast<std::uint32_t>(i), true});
    ev.push_back({b[i], static_cast<std::uint32_t>(i), false});
  }
  std::sort(ev.begin(), ev.end(), [](const Event& l, const Event& r) {
    if (l.x != r.x) return l.x < r.x;
    if (l.id != r.id) return l.id < r.id;
    return l.is_a && !r.is_a;
  });
  std::vector<std::uint8_t> state(n, 0);  // bit 0: a_i passed, bit 1: b_i passed
  std::int64_t ca = 0, cb = 0, one = 0;
  const double nn = static_cast<double>(n);
  std::vector<double> parts;
  parts.reserve(2 * n);
  for (std::size_t k = 0; k + 1 < ev.size(); ++k) {
    auto& s = state[ev[k].id];
    s |= ev[k].is_a ? 1 : 2;
    if (ev[k].is_a) ++ca;
    else ++cb;
    one += (s == 3) ? -1 : 1;
    const double w = ev[k + 1].x - ev[k].x;
    if (w <= 0.0) continue;
    const double D = static_cast<double>(ca - cb) / nn;
    const double Q = static_cast<double>(one) / nn;
    parts.push_back(std::sqrt(std::max(0.0, Q - D * D) / (nn - 1.0)) * w);
  }
  return pairwise_sum(parts.data(), parts.size());
}

double se_unpaired_1d(std::vector<double> a, std::vector<double> b) {
  const std::size_t na = a.size(), nb = b.size();
  if (na < 2 || nb < 2) return 0.0;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t ia = 0, ib = 0;
  std::vector<double> parts;
  parts.reserve(na + nb);
  double x = std::min(a[0], b[0]);
  while (ia < na || ib < nb) {
    // advance past every sample equal to x
    while (ia < na && a[ia] <= x) ++ia;
    while (ib < nb && b[ib] <= x) ++ib;
    if (ia == na && ib == nb) break;
    double next = std::numeric_limits<double>::infinity();
    if (ia < na) next = std::min(next, a[ia]);
    if (ib < nb) next = std::min(next, b[ib]);
    const double Fa = static_cast<double>(ia) / static_cast<double>(na);
    const double Fb = static_cast<double>(ib) / static_cast<double>(nb);
    const double var = Fa * (1.0 - Fa) / static_cast<double>(na - 1) + Fb * (1.0 - Fb) / static_cast<double>(nb - 1);
    parts.push_back(std::sqrt(var) * (next - x));
    x = next;
  }
  return pairwise_sum(parts.data(), parts.size());
}

double se_to_law_1d(std::vector<double> a) {
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  std::sort(a.begin(), a.end());
  std::vector<double> parts(n - 1);
  for (std::size_t k = 1; k < n; ++k) {
    const double F = static_cast<double>(k) / static_cast<double>(n);
    parts[k - 1] = std::sqrt(F * (1.0 - F) / static_cast<double>(n - 1)) * (a[k] - a[k - 1]);
  }
  return pairwise_sum(parts.data(), parts.size());
}

template <class Fn>
double sliced_average(const EmpiricalMeasure& a, const EmpiricalMeasure& b, std::size_t k,
                      std::uint64_t seed, Fn&& fn) {
  if (a.d() == 1) return fn(column(a), column(b));
  require(k >= 1, Errc::InvalidArgument, "n_directions must be >= 1");
  std::vector<double> vals;
  for (const Vec& u : directions(a.d(), k, seed)) vals.push_back(fn(project(a, u), project(b, u)));
  return pairwise_sum(vals.data(), vals.size()) / static_cast<double>(vals.size());
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

}  // namespace

double wasserstein1_sorted(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  require_equal(a, b, true);
  return sorted_w1(column(a), column(b));
}

double wasserstein1_matching(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  require_equal(a, b, false);
  const std::size_t n = a.size(), d = a.d();
  if (n > 512) fail(Errc::TooLarge, "exact matching supports at most 512 points");
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double t = a.points(i, k) - b.points(j, k);
        s += t * t;
      }
      cost[i * n + j] = std::sqrt(s);
    }
  const auto match = solve_assignment(cost, n);
  std::vector<double> matched(n);
  for (std::size_t i = 0; i < n; ++i) matched[i] = cost[i * n + match[i]];
  return pairwise_sum(matched.data(), n) / static_cast<double>(n);
}

SlicedW1 wasserstein1_sliced_detail(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                    std::size_t n_directions, std::uint64_t seed) {
  require_equal(a, b, false);
  require(n_directions >= 1, Errc::InvalidArgument, "n_directions must be >= 1");
  if (a.d() == 1) return {sorted_w1(column(a), column(b)), 0.0};
  std::vector<double> vals;
  vals.reserve(n_directions);
  for (const Vec& u : directions(a.d(), n_directions, seed)) vals.push_back(sorted_w1(project(a, u), project(b, u)));
  const double k = static_cast<double>(vals.size());
  const double mean = pairwise_sum(vals.data(), vals.size()) / k;
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  const double se = vals.size() > 1 ? std::sqrt(ss / (k - 1.0) / k) : 0.0;
  return {mean, se};
}

double wasserstein1_sliced(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                           std::size_t n_directions, std::uint64_t seed) {
  return wasserstein1_sliced_detail(a, b, n_directions, seed).value;
}

std::string_view to_string(W1Estimator e) {
  switch (e) {
    case W1Estimator::Auto: return "auto";
    case W1Estimator::Sorted: return "sorted";
    case W1Estimator::Matching: return "matching";
    case W1Estimator::Sliced: return "sliced";
  }
  return "auto";
}

std::optional<W1Estimator> parse_w1_estimator(std::string_view name) {
  if (name == "auto") return W1Estimator::Auto;
  if (name == "sorted") return W1Estimator::Sorted;
  if (name == "matching") return W1Estimator::Matching;
  if (name == "sliced") return W1Estimator::Sliced;
  return std::nullopt;
}

double wasserstein1(const EmpiricalMeasure& a, const EmpiricalMeasure& b, W1Estimator estimator,
                    std::uint64_t seed) {
  switch (estimator) {
    case W1Estimator::Sorted: return wasserstein1_sorted(a, b);
    case W1Estimator::Matching: return wasserstein1_matching(a, b);
    case W1Estimator::Sliced: return wasserstein1_sliced(a, b, 64, seed);
    case W1Estimator::Auto: break;
  }
  require_equal(a, b, false);
  if (a.d() == 1) return wasserstein1_sorted(a, b);
  if (a.size() <= 512) return wasserstein1_matching(a, b);
  return wasserstein1_sliced(a, b, 64, seed);
}

double gaussian_w1_1d(double mean1, double sd1, double mean2, double sd2) {
  require(sd1 >= 0.0 && sd2 >= 0.0, Errc::InvalidArgument, "standard deviations must be >= 0");
  const double a = mean1 - mean2;
  const double b = sd1 - sd2;
  if (b == 0.0) return std::abs(a);
  using boost::math::quadrature::gauss_kronrod;
  auto f = [a, b](double z) { return std::abs(a + b * z) * normal_pdf(z); };
  const double inf = std::numeric_limits<double>::infinity();
  const double z0 = -a / b;
  double err = 0.0;
  const double left = gauss_kronrod<double, 61>::integrate(f, -inf, z0, 20, 1e-14, &err);
  const double right = gauss_kronrod<double, 61>::integrate(f, z0, inf, 20, 1e-14, &err);
  return left + right;
}

double w1_to_gaussian_1d(const EmpiricalMeasure& a, double mean, double sd) {
  require(a.d() == 1, Errc::DimensionMismatch, "w1_to_gaussian_1d requires d = 1");
  require(sd >= 0.0, Errc::InvalidArgument, "sd must be >= 0");
  std::vector<double> x = column(a);
  const std::size_t n = x.size();
  if (sd == 0.0) {
    for (double& v : x) v = std::abs(v - mean);
    return pairwise_sum(x.data(), n) / static_cast<double>(n);
  }
  std::sort(x.begin(), x.end());
  // G(x) = ∫_{-∞}^x Φ((t−μ)/s) dt and H(x) = ∫_x^∞ (1 − Φ((t−μ)/s)) dt.
  auto G = [&](double t) {
    const double z = (t - mean) / sd;
    return sd * (z * normal_cdf(z) + normal_pdf(z));
  };
  auto H = [&](double t) {
    const double z = (t - mean) / sd;
    return sd * (normal_pdf(z) - z * normal_cdf(-z));
  };
  boost::math::normal_distribution<double> law(mean, sd);
  std::vector<double> parts;
  parts.reserve(n + 1);
  parts.push_back(G(x[0]));
  parts.push_back(H(x[n - 1]));
  for (std::size_t k = 1; k < n; ++k) {
    const double l = x[k - 1], r = x[k];
    if (r <= l) continue;
    const double c = static_cast<double>(k) / static_cast<double>(n);
    // ∫_l^r |c − Φ|; the two pieces are taken relative to whichever tail is smaller.
    auto mass_below = [&](double lo, double hi) {  // ∫ Φ
      return c <= 0.5 ? G(hi) - G(lo) : (hi - lo) - (H(lo) - H(hi));
    };
    const double xs = boost::math::quantile(law, c);
    if (xs <= l) parts.push_back(mass_below(l, r) - c * (r - l));
    else if (xs >= r) parts.push_back(c * (r - l) - mass_below(l, r));
    else parts.push_back((c * (xs - l) - mass_below(l, xs)) + (mass_below(xs, r) - c * (r - xs)));
  }
  return std::max(0.0, pairwise_sum(parts.data(), parts.size()));
}

double w1_se_paired(const EmpiricalMeasure& a, const EmpiricalMeasure& b, std::size_t n_directions,
                    std::uint64_t seed) {
  require_equal(a, b, false);
  return sliced_average(a, b, n_directions, seed,
                        [](const std::vector<double>& x, const std::vector<double>& y) { return se_paired_1d(x, y); });
}

double w1_se_unpaired(const EmpiricalMeasure& a, const EmpiricalMeasure& b, std::size_t n_directions,
                      std::uint64_t seed) {
  if (a.d() != b.d()) fail(Errc::DimensionMismatch, "measures have different dimensions");
  return sliced_average(a, b, n_directions, seed,
                        [](std::vector<double> x, std::vector<double> y) {
                          return se_unpaired_1d(std::move(x), std::move(y));
                        });
}

double w1_se_to_law(const EmpiricalMeasure& a) {
  require(a.d() == 1, Errc::DimensionMismatch, "w1_se_to_law requires d = 1");
  return se_to_law_1d(column(a));
}

EmpiricalMeasure subsample(const EmpiricalMeasure& a, std::size_t n, std::uint64_t seed) {
  require(n >= 1 && n <= a.size(), Errc::InvalidArgument, "subsample size must lie in [1, size]");
  if (n == a.size()) return a;
  std::vector<std::size_t> idx(a.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  CounterStream g(seed, 0, Purpose::Subsample);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(g, a.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  SampleMatrix pts(static_cast<Eigen::Index>(n), a.points.cols());
  for (std::size_t i = 0; i < n; ++i) pts.row(static_cast<Eigen::Index>(i)) = a.points.row(static_cast<Eigen::Index>(idx[i]));
  return EmpiricalMeasure(std::move(pts), a.provenance);
}

MomentReport moments(const EmpiricalMeasure& a, const std::vector<int>& orders, std::uint64_t seed) {
  for (int q : orders) require(q >= 2 && q % 2 == 0, Errc::InvalidArgument, "moment orders must be positive and even");
  const std::size_t n = a.size();
  MomentReport rep;
  rep.orders = orders;
  rep.n_used = n;
  std::vector<std::vector<double>> vals(orders.size(), std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double r2 = squared_norm(a.points.row(static_cast<Eigen::Index>(i)).data(), a.d());
    for (std::size_t o = 0; o < orders.size(); ++o) {
      double v = 1.0;
      for (int k = 0; k < orders[o] / 2; ++k) v *= r2;
      vals[o][i] = v;
    }
  }
  const double nn = static_cast<double>(n);
  for (std::size_t o = 0; o < orders.size(); ++o) rep.values.push_back(pairwise_sum(vals[o].data(), n) / nn);

  std::vector<std::vector<double>> boot(orders.size(), std::vector<double>(kBootstrapResamples));
  std::vector<std::size_t> pick(n);
  std::vector<double> tmp(n);
  for (std::size_t r = 0; r < kBootstrapResamples; ++r) {
    CounterStream g(seed, r, Purpose::Bootstrap);
    for (std::size_t i = 0; i < n; ++i) pick[i] = static_cast<std::size_t>(uniform_index(g, n));
    for (std::size_t o = 0; o < orders.size(); ++o) {
      for (std::size_t i = 0; i < n; ++i) tmp[i] = vals[o][pick[i]];
      boot[o][r] = pairwise_sum(tmp.data(), n) / nn;
    }
  }
  for (std::size_t o = 0; o < orders.size(); ++o) {
    const double mean = pairwise_sum(boot[o].data(), kBootstrapResamples) / kBootstrapResamples;
    double ss = 0.0;
    for (double v : boot[o]) ss += (v - mean) * (v - mean);
    rep.std_errors.push_back(std::sqrt(ss / (kBootstrapResamples - 1)));
  }
  return rep;
}

MomentReport moments(const Ensemble& e, const std::vector<int>& orders, std::uint64_t seed, double p_star) {
  for (int q : orders)
    require(q <= 2.0 * p_star, Errc::InvalidArgument, "moment order exceeds 2 p_star");
  const EmpiricalMeasure a = EmpiricalMeasure::from_ensemble(e);
  MomentReport rep = moments(a, orders, seed);
  rep.n_excluded = e.n_diverged();
  return rep;
}

}  // namespace memsde
