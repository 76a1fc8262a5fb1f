#include "memsde/error.hpp"
#include "memsde/simulate.hpp"

#include <Eigen/LU>

#include <cmath>

namespace memsde {

FirstVariationState simulate_first_variation(const SdeProblem& p, const Vec& x0, const Vec& v,
                                             double tau, double T, std::uint64_t seed,
                                             std::uint64_t trajectory_id) {
  const std::size_t d = p.d(), m = p.m();
  require(p.has_jacobians(), Errc::InvalidArgument, "first variation needs drift and diffusion Jacobians");
  require(m == d, Errc::DimensionMismatch, "first variation requires a square diffusion (m = d)");
  require(static_cast<std::size_t>(x0.size()) == d && static_cast<std::size_t>(v.size()) == d,
          Errc::DimensionMismatch, "x0 and v must have dimension d");
  const std::int64_t N = step_count(T, tau);
  const SchemeSpec tem = SchemeSpec::tem(p.gamma());
  const Coefficients& c = p.coefficients();
  const double scale = std::sqrt(tau);

  FirstVariationState st{x0, v, 0.0, false};
  Mat db(d, d), sig(d, m);
  std::vector<double> dsig(d * d * m);
  std::vector<double> z(d * m * 32);
  Vec dw(m), eta_next(d);
  StepWorkspace ws;
  Eigen::FullPivLU<Mat> lu(d, d);

  for (std::int64_t n0 = 0; n0 < N; n0 += 32) {
    const auto B = static_cast<std::size_t>(std::min<std::int64_t>(32, N - n0));
    standard_normals(seed, trajectory_id, static_cast<std::uint64_t>(n0) * m, B * m, z.data());
    for (std::size_t s = 0; s < B; ++s) {
      for (std::size_t j = 0; j < m; ++j) dw[j] = scale * z[s * m + j];
      if (!st.diverged) {
        c.drift_jacobian(st.x.data(), db.data());
        c.diffusion_jacobians(st.x.data(), dsig.data());
        c.diffusion(st.x.data(), sig.data());
        lu.compute(sig);
        if (!lu.isInvertible() || lu.rcond() < 1e-12)
          fail(Errc::SingularDiffusion, "diffusion matrix is not invertible along the path");
        st.accum += (lu.solve(st.eta)).dot(dw);
        eta_next = st.eta + (db * st.eta) * tau;
        for (std::size_t j = 0; j < m; ++j)
          eta_next += Eigen::Map<const Mat>(dsig.data() + j * d * d, d, d) * st.eta * dw[j];
        st.eta = eta_next;
      }
      tem.advance(p, tau, tau, 1, st.x.data(), dw.data(), ws);
      if (!st.diverged && !all_finite(st.x.data(), d)) st.diverged = true;
    }
  }
  return st;
}

}  // namespace memsde
