#include "emband/floquet.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "emband/ode.hpp"

namespace emband {

namespace {

using cplx = std::complex<double>;

struct BasisRhs {
  const PeriodicPotential* v0;
  double e;
  void operator()(double x, const std::vector<double>& y, std::vector<double>& dy) const {
    double q = (*v0)(x) - e;
    dy[0] = y[1];
    dy[1] = q * y[0];
    dy[2] = y[3];
    dy[3] = q * y[2];
  }
};

// Norm-equivalence constant between R and sqrt(u^2 + u'^2): the linear map
// z -> (Im(z phi), Im(z phi')) has determinant -omega; K bounds the squared
// singular values and their reciprocals over one period.
double norm_equivalence_constant(const std::vector<cplx>& phi, const std::vector<cplx>& dphi) {
  double k_norm = 1.0;
  for (std::size_t j = 0; j < phi.size(); ++j) {
    double a = phi[j].imag(), b = phi[j].real();
    double c = dphi[j].imag(), d = dphi[j].real();
    // Singular values of [[a, b], [c, d]].
    double t = a * a + b * b + c * c + d * d;
    double det = a * d - b * c;
    double disc = std::sqrt(std::max(0.0, t * t - 4.0 * det * det));
    double smax2 = 0.5 * (t + disc);
    double smin2 = 0.5 * (t - disc);
    if (smin2 <= 0.0) smin2 = 1e-300;
    k_norm = std::max({k_norm, smax2, 1.0 / smin2});
  }
  return k_norm;
}

} // namespace

FloquetData floquet_solution(const PeriodicPotential& v0, double e, const FloquetOptions& opt) {
  Monodromy m = monodromy(v0, e, opt.ode_tol);
  double delta = m.trace();
  if (std::fabs(delta) > 2.0 - opt.near_edge_tol)
    throw BandError("energy E=" + std::to_string(e) + " is not inside a band interior");

  FloquetData fd;
  fd.e = e;
  fd.k = std::acos(0.5 * delta);

  // Eigenvector of M for lambda = e^{ik}; two algebraic candidates, take the
  // better conditioned one.
  cplx lambda = std::polar(1.0, fd.k);
  cplx va0 = m.m01, va1 = lambda - m.m00;
  cplx vb0 = lambda - m.m11, vb1 = m.m10;
  double na = std::norm(va0) + std::norm(va1);
  double nb = std::norm(vb0) + std::norm(vb1);
  cplx phi0 = na >= nb ? va0 : vb0;
  cplx dphi0 = na >= nb ? va1 : vb1;
  double nv = std::sqrt(std::norm(phi0) + std::norm(dphi0));
  if (nv < 1e-12)
    throw BandError("degenerate Floquet eigenvector at E=" + std::to_string(e));
  phi0 /= nv;
  dphi0 /= nv;

  double omega = std::imag(std::conj(phi0) * dphi0);
  if (std::fabs(omega) < 1e-10)
    throw BandError("vanishing Wronskian invariant at E=" + std::to_string(e));
  if (omega < 0) {
    phi0 = std::conj(phi0);
    dphi0 = std::conj(dphi0);
    omega = -omega;
  }
  fd.phi0 = phi0;
  fd.dphi0 = dphi0;
  fd.omega = omega;

  // Basis integration over one period, sampled on the frame grid.
  const std::size_t n = std::max<std::size_t>(opt.grid_n, 1024);
  std::vector<double> grid = uniform_grid(0.0, 1.0, n + 1);
  std::vector<cplx> phi(n + 1), dphi(n + 1);

  BasisRhs rhs{&v0, e};
  std::vector<double> y = {1, 0, 0, 1};
  OdeOptions oopt;
  oopt.rtol = opt.ode_tol;
  oopt.atol = opt.ode_tol;
  Dopri5<BasisRhs> solver(4);
  std::size_t idx = 0;
  solver.integrate_sampled(rhs, 0.0, 1.0, y, oopt, grid,
                           [&](double, const std::vector<double>& s) {
                             phi[idx] = phi0 * s[0] + dphi0 * s[2];
                             dphi[idx] = phi0 * s[1] + dphi0 * s[3];
                             ++idx;
                           });
  if (idx != n + 1) throw BandError("internal: frame sampling incomplete");

  // Unwrapped phase along the period; fail loudly if the grid under-resolves
  // the rotation.
  std::vector<double> gamma(n + 1);
  gamma[0] = std::arg(phi[0]);
  for (std::size_t j = 1; j <= n; ++j) {
    double raw = std::arg(phi[j]);
    double prev = gamma[j - 1];
    double step = raw - std::fmod(prev, 2.0 * M_PI);
    step -= 2.0 * M_PI * std::round(step / (2.0 * M_PI));
    if (std::fabs(step) > M_PI / 2)
      throw BandError("phase grid too coarse to unwrap gamma at E=" + std::to_string(e));
    gamma[j] = prev + step;
  }
  fd.gamma0 = gamma[0];

  double rho = gamma[n] - gamma[0];
  fd.rho = rho;
  if (rho <= 0)
    throw BandError("nonpositive phase advance at E=" + std::to_string(e));
  // rho must agree with +-k modulo 2 pi.
  double r1 = std::fabs(std::remainder(rho - fd.k, 2.0 * M_PI));
  double r2 = std::fabs(std::remainder(rho + fd.k, 2.0 * M_PI));
  if (std::min(r1, r2) > 1e-6)
    throw BandError("phase advance inconsistent with quasimomentum at E=" +
                    std::to_string(e));

  // Wronskian constancy across the period is a strong integration check.
  std::vector<double> abs2(n + 1), eta(n + 1);
  double worst_omega = 0.0;
  for (std::size_t j = 0; j <= n; ++j) {
    abs2[j] = std::norm(phi[j]);
    eta[j] = gamma[j] - rho * grid[j];
    worst_omega = std::max(worst_omega,
                           std::fabs(std::imag(std::conj(phi[j]) * dphi[j]) - omega));
  }
  if (worst_omega > 1e-7 * std::max(1.0, omega))
    throw BandError("Wronskian invariant drifts across the period at E=" + std::to_string(e));
  if (std::fabs(eta[n] - eta[0]) > 1e-7)
    throw BandError("periodic frame inconsistent (eta mismatch) at E=" + std::to_string(e));

  std::vector<cplx> p(n), dp(n);
  for (std::size_t j = 0; j < n; ++j) {
    cplx peel = std::polar(1.0, -rho * grid[j]);
    p[j] = phi[j] * peel;
    dp[j] = dphi[j] * peel;
  }
  fd.p_ = PeriodicTableC(p);
  fd.dp_ = PeriodicTableC(dp);
  fd.abs2_ = PeriodicTableD(std::vector<double>(abs2.begin(), abs2.end() - 1));
  fd.eta_ = PeriodicTableD(std::vector<double>(eta.begin(), eta.end() - 1));

  double min_abs2 = abs2[0], max_abs2 = abs2[0];
  for (double a : abs2) {
    min_abs2 = std::min(min_abs2, a);
    max_abs2 = std::max(max_abs2, a);
  }
  if (min_abs2 <= 0) throw BandError("Bloch solution vanishes on the period");
  fd.min_gp_ = omega / max_abs2;
  fd.max_gp_ = omega / min_abs2;
  fd.g_bound = std::max(fd.max_gp_, 1.0 / fd.min_gp_);
  fd.k_norm = norm_equivalence_constant(phi, dphi);

  return fd;
}

} // namespace emband
