#include "emband/prufer.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "emband/band_structure.hpp"
#include "emband/ode.hpp"

namespace emband {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::size_t auto_samples(double x0, double x1, double rho,
                         const PruferOptions& opt) {
  if (opt.n_samples > 0) return std::max<std::size_t>(opt.n_samples, 2);
  double per_unit = std::max(4.0, 16.0 * rho / (2.0 * kPi));
  auto n = static_cast<std::size_t>(std::ceil((x1 - x0) * per_unit)) + 1;
  return std::min<std::size_t>(std::max<std::size_t>(n, 33), 200001);
}

}  // namespace

std::array<double, 2> BoundaryCondition::direction() const {
  if (theta0 == kPi / 2) return {0.0, 1.0};
  return {std::cos(theta0), std::sin(theta0)};
}

double initial_prufer_angle(const BoundaryCondition& bc,
                            const FloquetData& fd) {
  auto dir = bc.direction();
  std::complex<double> p = fd.phi(bc.a);
  std::complex<double> dp = fd.dphi(bc.a);
  // Im(z p) = u, Im(z dp) = u'; determinant is -Im(conj(p) dp) = -omega.
  double det = p.imag() * dp.real() - p.real() * dp.imag();
  double zr = (dir[0] * dp.real() - dir[1] * p.real()) / det;
  double zi = (p.imag() * dir[1] - dp.imag() * dir[0]) / det;
  double psi = std::atan2(zi, zr) + fd.gamma(bc.a);
  psi = std::fmod(psi, 2.0 * kPi);
  if (psi < 0) psi += 2.0 * kPi;
  return psi;
}

PruferTrajectory integrate_prufer(const FloquetData& fd,
                                  const std::function<double(double)>& v,
                                  double x0, double x1, double psi0,
                                  const PruferOptions& opt) {
  if (!(x1 > x0)) throw BandError("integrate_prufer: requires x0 < x1");

  PruferTrajectory traj;
  traj.energy = fd.e;
  traj.floquet_ref = "E=" + std::to_string(fd.e);
  traj.grid = uniform_grid(x0, x1, auto_samples(x0, x1, fd.rho, opt));
  traj.ln_r.reserve(traj.grid.size());
  traj.theta.reserve(traj.grid.size());

  auto rhs = [&](double x, const std::vector<double>& y,
                 std::vector<double>& dy) {
    double gp = fd.gamma_prime(x);
    double th = y[0] + fd.gamma(x);
    double w = v(x) / gp;
    double s = std::sin(th);
    dy[0] = -w * s * s;
    dy[1] = 0.5 * w * std::sin(2.0 * th);
  };

  std::vector<double> y = {psi0 - fd.gamma(x0), 0.0};
  OdeOptions oopt;
  oopt.rtol = oopt.atol = opt.ode_tol;
  Dopri5<decltype(rhs)> solver(2);
  solver.integrate_sampled(rhs, x0, x1, y, oopt, traj.grid,
                           [&](double x, const std::vector<double>& s) {
                             traj.theta.push_back(s[0] + fd.gamma(x));
                             traj.ln_r.push_back(s[1]);
                           });
  return traj;
}

SolutionSamples reconstruct_solution(const PruferTrajectory& traj,
                                     const FloquetData& fd) {
  SolutionSamples out;
  out.grid = traj.grid;
  out.u.resize(traj.grid.size());
  out.du.resize(traj.grid.size());
  for (std::size_t i = 0; i < traj.grid.size(); ++i) {
    double x = traj.grid[i];
    double sigma = traj.theta[i] - fd.gamma(x);
    std::complex<double> z = std::polar(std::exp(traj.ln_r[i]), sigma);
    out.u[i] = (z * fd.phi(x)).imag();
    out.du[i] = (z * fd.dphi(x)).imag();
  }
  return out;
}

SolutionSamples direct_solve(const PeriodicPotential& v0,
                             const std::function<double(double)>& v, double e,
                             const BoundaryCondition& bc, double x0, double x1,
                             const PruferOptions& opt) {
  if (bc.a > x0) throw BandError("direct_solve: requires bc.a <= x0");
  if (!(x1 > x0)) throw BandError("direct_solve: requires x0 < x1");

  SolutionSamples out;
  out.grid = uniform_grid(x0, x1, auto_samples(x0, x1, std::sqrt(std::abs(e)) + 1.0, opt));
  out.u.reserve(out.grid.size());
  out.du.reserve(out.grid.size());

  auto rhs = [&](double x, const std::vector<double>& y,
                 std::vector<double>& dy) {
    dy[0] = y[1];
    dy[1] = (v0(x) + v(x) - e) * y[0];
  };

  auto dir = bc.direction();
  std::vector<double> y = {dir[0], dir[1]};
  OdeOptions oopt;
  oopt.rtol = oopt.atol = opt.ode_tol;
  Dopri5<decltype(rhs)> solver(2);
  solver.integrate_sampled(rhs, bc.a, x1, y, oopt, out.grid,
                           [&](double, const std::vector<double>& s) {
                             out.u.push_back(s[0]);
                             out.du.push_back(s[1]);
                           });
  return out;
}

}  // namespace emband
