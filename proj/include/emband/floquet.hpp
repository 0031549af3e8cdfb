#pragma once

// Bloch solution data for one energy inside a band: the complex solution
// phi of -phi'' + V0 phi = E phi with phi(x+1) = lambda phi(x), normalized by
// |phi(0)|^2 + |phi'(0)|^2 = 1 and oriented so omega = Im(conj(phi) phi') > 0.
//
// Writing phi = |phi| e^{i gamma} with gamma continuous gives the rotating
// frame for the generalized Pruefer variables: gamma' = omega / |phi|^2 is
// bounded between 1/G and G, and gamma(x) = rho x + eta(x) with eta exactly
// 1-periodic, where rho = gamma(1) - gamma(0) agrees with the quasimomentum
// k up to sign and multiples of 2 pi.

#include <complex>
#include <vector>

#include "emband/band_structure.hpp"
#include "emband/interp.hpp"
#include "emband/periodic_potential.hpp"

namespace emband {

struct FloquetOptions {
  double ode_tol = 1e-10;
  std::size_t grid_n = 2048;    // samples per period for the frame tables
  double near_edge_tol = 1e-6;  // reject |Delta| > 2 - this
};

class FloquetData {
 public:
  double e = 0.0;
  double k = 0.0;     // arccos(Delta/2) in (0, pi)
  double rho = 0.0;   // phase advance gamma(x+1) - gamma(x), > 0
  double omega = 0.0; // Wronskian invariant Im(conj(phi) phi'), > 0
  double g_bound = 1.0;      // 1/G <= gamma' <= G
  double k_norm = 1.0;       // (|u|^2+|u'|^2)/K <= R^2 <= K (|u|^2+|u'|^2)
  double gamma0 = 0.0;       // gamma(0) = arg phi(0)
  std::complex<double> phi0, dphi0;

  double gamma(double x) const { return rho * x + eta_(x); }
  double gamma_prime(double x) const { return omega / abs2_(x); }
  double abs2_phi(double x) const { return abs2_(x); }
  double abs_phi(double x) const { return std::sqrt(abs2_(x)); }

  std::complex<double> phi(double x) const {
    return p_(x) * std::polar(1.0, rho * x);
  }
  std::complex<double> dphi(double x) const {
    return dp_(x) * std::polar(1.0, rho * x);
  }

  double min_gamma_prime() const { return min_gp_; }
  double max_gamma_prime() const { return max_gp_; }

  // Frame tables; filled by floquet_solution.
  PeriodicTableC p_, dp_;     // phi e^{-i rho x} and phi' e^{-i rho x}
  PeriodicTableD eta_, abs2_; // gamma - rho x and |phi|^2
  double min_gp_ = 1.0, max_gp_ = 1.0;
};

FloquetData floquet_solution(const PeriodicPotential& v0, double e,
                             const FloquetOptions& opt = {});

} // namespace emband
