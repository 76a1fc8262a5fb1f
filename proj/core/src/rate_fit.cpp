#include "memsde/error.hpp"
#include "memsde/experiments.hpp"

#include <cmath>

namespace memsde {

std::string_view to_string(RateModel model) {
  return model == RateModel::LogTau ? "logtau" : "logtau_logcorrected";
}

RateFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), Errc::DegenerateInput, "fit: x and y differ in length");
  require(x.size() >= 2, Errc::DegenerateInput, "fit: at least two points are required");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0.0, Errc::DegenerateInput, "fit: abscissae are all equal");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  return f;
}

RateFit fit_log_rate(const std::vector<double>& taus, const std::vector<double>& errors, RateModel model) {
  require(taus.size() == errors.size(), Errc::DegenerateInput, "taus and errors differ in length");
  require(taus.size() >= 3, Errc::DegenerateInput, "at least three (tau, error) pairs are required");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    require(taus[i] > 0.0 && taus[i] < 1.0, Errc::DegenerateInput, "tau must lie in (0, 1)");
    require(errors[i] > 0.0 && std::isfinite(errors[i]), Errc::DegenerateInput,
            "errors must be positive and finite");
    const double lt = std::log(taus[i]);
    x.push_back(model == RateModel::LogTau ? lt : lt + std::log(std::abs(lt)));
    y.push_back(std::log(errors[i]));
  }
  return fit_line(x, y);
}

}  // namespace memsde
