#include "memsde/problem.hpp"

#include "memsde/checks.hpp"
#include "memsde/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace memsde {

double AssumptionConstants::tau_max() const { return std::min(1.0 / K4, 1.0); }

void AssumptionConstants::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) fail(Errc::InvalidArgument, std::string("assumption constants: ") + what);
  };
  check(std::isfinite(L1) && std::isfinite(L2), "L1 and L2 must be finite");
  check(L3 > 0.0 && std::isfinite(L3), "L3 must be positive");
  check(K4 > 0.0 && std::isfinite(K4), "K4 must be positive");
  check(lambda0 > 0.0 && lambda0 < 1.0, "lambda0 must lie in (0, 1)");
  check(alpha3 < 2.0, "alpha3 must be < 2");
  check(p_star >= 1.0 && std::isfinite(p_star), "p_star must be >= 1");
  check(std::isfinite(K3) && std::isfinite(K5) && std::isfinite(K6), "K3, K5, K6 must be finite");
}

void apply_constant_overrides(AssumptionConstants& c, const ParamMap& overrides) {
  for (const auto& [key, value] : overrides) {
    if (key == "L1") c.L1 = value;
    else if (key == "L2") c.L2 = value;
    else if (key == "L3") c.L3 = value;
    else if (key == "p_star") c.p_star = value;
    else if (key == "lambda0") c.lambda0 = value;
    else if (key == "K1") c.K1 = value;
    else if (key == "K2") c.K2 = value;
    else if (key == "r0") c.r0 = value;
    else if (key == "K3") c.K3 = value;
    else if (key == "K4") c.K4 = value;
    else if (key == "K5") c.K5 = value;
    else if (key == "K6") c.K6 = value;
    else if (key == "alpha3") c.alpha3 = value;
    else fail(Errc::ConfigError, "unknown assumption constant '" + key + "'");
  }
}

// ---------------------------------------------------------------------------------------
// Coefficients defaults

Coefficients::Coefficients(std::size_t d, std::size_t m) : d_(d), m_(m) {
  require(d >= 1 && m >= 1, Errc::InvalidArgument, "dimensions d and m must be >= 1");
}

void Coefficients::diffusion_diagonal(const double* x, double* out) const {
  std::vector<double> full(d_ * m_);
  diffusion(x, full.data());
  for (std::size_t i = 0; i < d_; ++i) out[i] = full[i * d_ + i];
}

void Coefficients::drift_jacobian(const double*, double*) const {
  fail(Errc::InvalidArgument, "problem does not provide a drift Jacobian");
}

void Coefficients::diffusion_jacobians(const double*, double*) const {
  fail(Errc::InvalidArgument, "problem does not provide diffusion Jacobians");
}

void Coefficients::drift_batch(std::size_t count, const double* xs, double* out) const {
  for (std::size_t k = 0; k < count; ++k) drift(xs + k * d_, out + k * d_);
}

void Coefficients::diffusion_batch(std::size_t count, const double* xs, double* out) const {
  for (std::size_t k = 0; k < count; ++k) diffusion(xs + k * d_, out + k * d_ * m_);
}

void Coefficients::diffusion_diagonal_batch(std::size_t count, const double* xs,
                                            double* out) const {
  for (std::size_t k = 0; k < count; ++k) diffusion_diagonal(xs + k * d_, out + k * d_);
}

// ---------------------------------------------------------------------------------------
// SdeProblem

SdeProblem::SdeProblem(std::string name, std::shared_ptr<const Coefficients> coefficients,
                       double gamma, AssumptionConstants constants, ParamMap params,
                       std::optional<GaussianLaw> stationary_law)
    : name_(std::move(name)),
      coefficients_(std::move(coefficients)),
      gamma_(gamma),
      constants_(constants),
      params_(std::move(params)),
      stationary_law_(std::move(stationary_law)) {
  require(coefficients_ != nullptr, Errc::InvalidArgument, "coefficients must not be null");
  require(gamma_ > 1.0 && std::isfinite(gamma_), Errc::InvalidArgument, "gamma must be > 1");
  constants_.validate();
}

Vec SdeProblem::drift(const Vec& x) const {
  require(static_cast<std::size_t>(x.size()) == d(), Errc::DimensionMismatch, "drift: state has wrong dimension");
  Vec out(d());
  coefficients_->drift(x.data(), out.data());
  return out;
}

Mat SdeProblem::diffusion(const Vec& x) const {
  require(static_cast<std::size_t>(x.size()) == d(), Errc::DimensionMismatch, "diffusion: state has wrong dimension");
  Mat out(d(), m());
  coefficients_->diffusion(x.data(), out.data());
  return out;
}

Mat SdeProblem::drift_jacobian(const Vec& x) const {
  require(static_cast<std::size_t>(x.size()) == d(), Errc::DimensionMismatch, "drift_jacobian: state has wrong dimension");
  Mat out(d(), d());
  coefficients_->drift_jacobian(x.data(), out.data());
  return out;
}

std::vector<Mat> SdeProblem::diffusion_jacobians(const Vec& x) const {
  require(static_cast<std::size_t>(x.size()) == d(), Errc::DimensionMismatch, "diffusion_jacobians: state has wrong dimension");
  std::vector<double> buf(d() * d() * m());
  coefficients_->diffusion_jacobians(x.data(), buf.data());
  std::vector<Mat> out;
  out.reserve(m());
  for (std::size_t j = 0; j < m(); ++j)
    out.emplace_back(Eigen::Map<const Mat>(buf.data() + j * d() * d(), d(), d()));
  return out;
}

SdeProblem SdeProblem::with_constants(const AssumptionConstants& constants) const {
  SdeProblem copy = *this;
  constants.validate();
  copy.constants_ = constants;
  return copy;
}

// ---------------------------------------------------------------------------------------
// Callable-backed problems

namespace {

class CallableCoefficients final : public Coefficients {
 public:
  explicit CallableCoefficients(ProblemCallables f) : Coefficients(f.d, f.m), f_(std::move(f)) {
    require(static_cast<bool>(f_.drift) && static_cast<bool>(f_.diffusion), Errc::InvalidArgument,
            "drift and diffusion callables are required");
  }

  void drift(const double* x, double* out) const override {
    Vec v = f_.drift(Eigen::Map<const Vec>(x, d()));
    require(static_cast<std::size_t>(v.size()) == d(), Errc::DimensionMismatch, "drift returned wrong size");
    std::copy(v.data(), v.data() + d(), out);
  }

  void diffusion(const double* x, double* out) const override {
    Mat s = f_.diffusion(Eigen::Map<const Vec>(x, d()));
    require(static_cast<std::size_t>(s.rows()) == d() && static_cast<std::size_t>(s.cols()) == m(),
            Errc::DimensionMismatch, "diffusion returned wrong shape");
    std::copy(s.data(), s.data() + d() * m(), out);
  }

  bool has_jacobians() const override {
    return static_cast<bool>(f_.drift_jacobian) && static_cast<bool>(f_.diffusion_jacobians);
  }

  void drift_jacobian(const double* x, double* out) const override {
    if (!f_.drift_jacobian) Coefficients::drift_jacobian(x, out);
    Mat j = f_.drift_jacobian(Eigen::Map<const Vec>(x, d()));
    require(static_cast<std::size_t>(j.rows()) == d() && static_cast<std::size_t>(j.cols()) == d(),
            Errc::DimensionMismatch, "drift_jacobian returned wrong shape");
    std::copy(j.data(), j.data() + d() * d(), out);
  }

  void diffusion_jacobians(const double* x, double* out) const override {
    if (!f_.diffusion_jacobians) Coefficients::diffusion_jacobians(x, out);
    auto js = f_.diffusion_jacobians(Eigen::Map<const Vec>(x, d()));
    require(js.size() == m(), Errc::DimensionMismatch, "diffusion_jacobians must return m matrices");
    for (std::size_t k = 0; k < m(); ++k) {
      require(static_cast<std::size_t>(js[k].rows()) == d() && static_cast<std::size_t>(js[k].cols()) == d(),
              Errc::DimensionMismatch, "diffusion Jacobian has wrong shape");
      std::copy(js[k].data(), js[k].data() + d() * d(), out + k * d() * d());
    }
  }

 private:
  ProblemCallables f_;
};

// b(x)_i = x_i - x_i^3, σ(x) = diag(sqrt(λ0² + c x_i²))
class DoubleWell final : public Coefficients {
 public:
  DoubleWell(std::size_t d, double c, double lambda0)
      : Coefficients(d, d), c_(c), l2_(lambda0 * lambda0) {}

  void drift(const double* x, double* out) const override { drift_batch(1, x, out); }

  void drift_batch(std::size_t count, const double* xs, double* out) const override {
    const std::size_t n = count * d();
    for (std::size_t i = 0; i < n; ++i) out[i] = xs[i] - xs[i] * xs[i] * xs[i];
  }

  void diffusion(const double* x, double* out) const override {
    std::fill(out, out + d() * d(), 0.0);
    for (std::size_t i = 0; i < d(); ++i) out[i * d() + i] = std::sqrt(l2_ + c_ * x[i] * x[i]);
  }

  bool diagonal_diffusion() const override { return true; }

  void diffusion_diagonal(const double* x, double* out) const override {
    diffusion_diagonal_batch(1, x, out);
  }

  void diffusion_diagonal_batch(std::size_t count, const double* xs, double* out) const override {
    const std::size_t n = count * d();
    for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(l2_ + c_ * xs[i] * xs[i]);
  }

  bool has_jacobians() const override { return true; }

  void drift_jacobian(const double* x, double* out) const override {
    std::fill(out, out + d() * d(), 0.0);
    for (std::size_t i = 0; i < d(); ++i) out[i * d() + i] = 1.0 - 3.0 * x[i] * x[i];
  }

  // (Dσ_j)_{ik} = δ_ij δ_ik c x_j / sqrt(λ0² + c x_j²)
  void diffusion_jacobians(const double* x, double* out) const override {
    const std::size_t dd = d() * d();
    std::fill(out, out + dd * d(), 0.0);
    for (std::size_t j = 0; j < d(); ++j)
      out[j * dd + j * d() + j] = c_ * x[j] / std::sqrt(l2_ + c_ * x[j] * x[j]);
  }

 private:
  double c_;
  double l2_;
};

// b(x) = (1 - |x|²) x in R³, σ(x) = diag(sqrt(λ0² + c x_i²))
class GinzburgLandau final : public Coefficients {
 public:
  GinzburgLandau(double c, double lambda0) : Coefficients(3, 3), c_(c), l2_(lambda0 * lambda0) {}

  void drift(const double* x, double* out) const override {
    const double r2 = squared_norm(x, 3);
    for (std::size_t i = 0; i < 3; ++i) out[i] = x[i] - r2 * x[i];
  }

  void diffusion(const double* x, double* out) const override {
    std::fill(out, out + 9, 0.0);
    for (std::size_t i = 0; i < 3; ++i) out[i * 3 + i] = std::sqrt(l2_ + c_ * x[i] * x[i]);
  }

  bool diagonal_diffusion() const override { return true; }

  void diffusion_diagonal(const double* x, double* out) const override {
    for (std::size_t i = 0; i < 3; ++i) out[i] = std::sqrt(l2_ + c_ * x[i] * x[i]);
  }

  bool has_jacobians() const override { return true; }

  // Db = (1 - |x|²) I - 2 x xᵀ
  void drift_jacobian(const double* x, double* out) const override {
    const double r2 = squared_norm(x, 3);
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t i = 0; i < 3; ++i)
        out[k * 3 + i] = (i == k ? 1.0 - r2 : 0.0) - 2.0 * x[i] * x[k];
  }

  void diffusion_jacobians(const double* x, double* out) const override {
    std::fill(out, out + 27, 0.0);
    for (std::size_t j = 0; j < 3; ++j)
      out[j * 9 + j * 3 + j] = c_ * x[j] / std::sqrt(l2_ + c_ * x[j] * x[j]);
  }

 private:
  double c_;
  double l2_;
};

// b(x) = -θ x, σ = s I
class OrnsteinUhlenbeck final : public Coefficients {
 public:
  OrnsteinUhlenbeck(std::size_t d, double theta, double sigma)
      : Coefficients(d, d), theta_(theta), sigma_(sigma) {}

  void drift(const double* x, double* out) const override { drift_batch(1, x, out); }

  void drift_batch(std::size_t count, const double* xs, double* out) const override {
    const std::size_t n = count * d();
    for (std::size_t i = 0; i < n; ++i) out[i] = -theta_ * xs[i];
  }

  void diffusion(const double*, double* out) const override {
    std::fill(out, out + d() * d(), 0.0);
    for (std::size_t i = 0; i < d(); ++i) out[i * d() + i] = sigma_;
  }

  bool diagonal_diffusion() const override { return true; }

  void diffusion_diagonal(const double*, double* out) const override {
    std::fill(out, out + d(), sigma_);
  }

  void diffusion_diagonal_batch(std::size_t count, const double*, double* out) const override {
    std::fill(out, out + count * d(), sigma_);
  }

  bool has_jacobians() const override { return true; }

  void drift_jacobian(const double*, double* out) const override {
    std::fill(out, out + d() * d(), 0.0);
    for (std::size_t i = 0; i < d(); ++i) out[i * d() + i] = -theta_;
  }

  void diffusion_jacobians(const double*, double* out) const override {
    std::fill(out, out + d() * d() * d(), 0.0);
  }

 private:
  double theta_;
  double sigma_;
};

double param_or(const ParamMap& params, std::string_view key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

double required_param(const ParamMap& params, std::string_view key, std::string_view problem) {
  auto it = params.find(key);
  if (it == params.end())
    fail(Errc::MissingParam, std::string(problem) + " requires parameter '" + std::string(key) + "'");
  return it->second;
}

std::size_t dimension_param(const ParamMap& params, double fallback) {
  const double d = param_or(params, "d", fallback);
  require(d >= 1.0 && d <= 1024.0 && std::floor(d) == d, Errc::InvalidArgument,
          "parameter 'd' must be a positive integer");
  return static_cast<std::size_t>(d);
}

void reject_unknown(const ParamMap& params, std::initializer_list<std::string_view> allowed,
                    std::string_view problem) {
  for (const auto& [key, value] : params) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail(Errc::ConfigError, std::string(problem) + ": unknown parameter '" + key + "'");
  }
}

}  // namespace

SdeProblem make_problem(std::string name, ProblemCallables callables, double gamma,
                        const AssumptionConstants& constants) {
  auto coefficients = std::make_shared<const CallableCoefficients>(std::move(callables));
  return SdeProblem(std::move(name), std::move(coefficients), gamma, constants);
}

std::optional<BuiltinProblem> parse_builtin(std::string_view name) {
  if (name == "double_well") return BuiltinProblem::DoubleWell;
  if (name == "ginzburg_landau_3d") return BuiltinProblem::GinzburgLandau3d;
  if (name == "ornstein_uhlenbeck") return BuiltinProblem::OrnsteinUhlenbeck;
  return std::nullopt;
}

std::string_view to_string(BuiltinProblem problem) {
  switch (problem) {
    case BuiltinProblem::DoubleWell: return "double_well";
    case BuiltinProblem::GinzburgLandau3d: return "ginzburg_landau_3d";
    case BuiltinProblem::OrnsteinUhlenbeck: return "ornstein_uhlenbeck";
  }
  return "unknown";
}

AssumptionConstants default_constants(BuiltinProblem problem, const ParamMap& params,
                                      double p_star) {
  AssumptionConstants c;
  c.p_star = p_star;
  // p⋆(2p⋆−1)/2, the coercivity weight on ‖σ‖²
  const double k = p_star * (2.0 * p_star - 1.0) / 2.0;
  switch (problem) {
    case BuiltinProblem::DoubleWell:
    case BuiltinProblem::GinzburgLandau3d: {
      const bool gl = problem == BuiltinProblem::GinzburgLandau3d;
      const double d = gl ? 3.0 : static_cast<double>(dimension_param(params, 1.0));
      const double cc = param_or(params, "c", 0.25);
      const double l0 = param_or(params, "lambda0", 0.5);
      c.lambda0 = l0;
      c.L1 = 1.0 + (2.0 * p_star - 1.0) * cc;
      // Σ x_i⁴ ≥ |x|⁴/d for the separable drift; the radial drift has exactly |x|⁴.
      const double quartic = gl ? 1.0 : 1.0 / d;
      c.L3 = quartic / 2.0;
      c.L2 = k * d * l0 * l0 + (1.0 + k * cc) * (1.0 + k * cc) / (2.0 * quartic) + 0.25;
      c.K1 = c.L1;
      c.K2 = 1.0;
      c.r0 = 2.0;
      c.K3 = d * (2.0 + k);
      c.K4 = 1.0;
      c.K5 = d;
      c.K6 = 1.0;
      c.alpha3 = 0.0;
      break;
    }
    case BuiltinProblem::OrnsteinUhlenbeck: {
      const double d = static_cast<double>(dimension_param(params, 1.0));
      const double theta = param_or(params, "theta", 1.0);
      const double s = param_or(params, "sigma", 1.0);
      c.lambda0 = std::min(0.9 * std::min(s, 1.0 / s), 0.99);
      c.L1 = 0.0;
      c.L3 = 0.1 * theta;
      c.L2 = k * d * s * s + 1.0;
      c.K1 = theta;
      c.K2 = theta;
      c.r0 = 1.0;
      c.K3 = 2.0 * k * d * s * s + 1.0;
      c.K4 = theta / 2.0;
      c.K5 = d * s * s;
      c.K6 = 1.0;
      c.alpha3 = 0.0;
      break;
    }
  }
  return c;
}

SdeProblem make_builtin(BuiltinProblem problem, const ParamMap& params,
                        const ParamMap& constant_overrides) {
  const std::string name(to_string(problem));
  double p_star = 2.0;
  if (auto it = constant_overrides.find("p_star"); it != constant_overrides.end()) p_star = it->second;

  std::shared_ptr<const Coefficients> coefficients;
  double gamma = 3.0;
  std::optional<GaussianLaw> stationary;
  switch (problem) {
    case BuiltinProblem::DoubleWell: {
      reject_unknown(params, {"d", "c", "lambda0"}, name);
      const std::size_t d = dimension_param(params, 1.0);
      const double c = param_or(params, "c", 0.25);
      const double l0 = param_or(params, "lambda0", 0.5);
      require(c >= 0.0, Errc::InvalidArgument, "double_well: c must be >= 0");
      require(l0 > 0.0 && l0 < 1.0, Errc::InvalidArgument, "double_well: lambda0 must lie in (0,1)");
      coefficients = std::make_shared<const DoubleWell>(d, c, l0);
      break;
    }
    case BuiltinProblem::GinzburgLandau3d: {
      reject_unknown(params, {"c", "lambda0"}, name);
      const double c = param_or(params, "c", 0.25);
      const double l0 = param_or(params, "lambda0", 0.5);
      require(c >= 0.0, Errc::InvalidArgument, "ginzburg_landau_3d: c must be >= 0");
      require(l0 > 0.0 && l0 < 1.0, Errc::InvalidArgument, "ginzburg_landau_3d: lambda0 must lie in (0,1)");
      coefficients = std::make_shared<const GinzburgLandau>(c, l0);
      break;
    }
    case BuiltinProblem::OrnsteinUhlenbeck: {
      reject_unknown(params, {"d", "theta", "sigma", "gamma"}, name);
      const std::size_t d = dimension_param(params, 1.0);
      const double theta = required_param(params, "theta", name);
      const double sigma = required_param(params, "sigma", name);
      gamma = param_or(params, "gamma", 1.5);
      require(theta > 0.0, Errc::InvalidArgument, "ornstein_uhlenbeck: theta must be > 0");
      require(sigma > 0.0, Errc::InvalidArgument, "ornstein_uhlenbeck: sigma must be > 0");
      coefficients = std::make_shared<const OrnsteinUhlenbeck>(d, theta, sigma);
      const double sd = sigma / std::sqrt(2.0 * theta);
      stationary = GaussianLaw{Vec::Zero(static_cast<Eigen::Index>(d)),
                               Vec::Constant(static_cast<Eigen::Index>(d), sd)};
      break;
    }
  }

  AssumptionConstants constants = default_constants(problem, params, p_star);
  apply_constant_overrides(constants, constant_overrides);
  SdeProblem result(name, std::move(coefficients), gamma, constants, params, std::move(stationary));

  const auto report = check_coercivity(result, 2000, 10.0, 0);
  if (!report.passed()) {
    std::ostringstream msg;
    msg << name << ": declared coercivity constants fail at " << report.n_violations << " of "
        << report.n_points << " sampled points (worst margin " << report.worst_margin << ")";
    fail(Errc::CoercivityViolated, msg.str());
  }
  return result;
}

SdeProblem make_builtin(std::string_view name, const ParamMap& params,
                        const ParamMap& constant_overrides) {
  auto which = parse_builtin(name);
  if (!which) fail(Errc::UnknownProblem, "unknown problem '" + std::string(name) + "'");
  return make_builtin(*which, params, constant_overrides);
}

}  // namespace memsde
