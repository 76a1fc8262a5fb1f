#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>

namespace memsde {

using Vec = Eigen::VectorXd;
/// Column-major d×m matrix; column j is the noise direction σ_j.
using Mat = Eigen::MatrixXd;
/// One sample per row.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Euclidean norm computed as sqrt of an in-order sum of squares.
/// Every module uses this one definition so that norm bounds compare like with like.
inline double norm(const double* x, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) s += x[i] * x[i];
  return std::sqrt(s);
}

inline double squared_norm(const double* x, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) s += x[i] * x[i];
  return s;
}

inline double norm(const Vec& x) { return norm(x.data(), static_cast<std::size_t>(x.size())); }

inline bool all_finite(const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

}  // namespace memsde
