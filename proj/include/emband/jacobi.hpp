#pragma once

// Discrete counterpart of the continuous machinery: q-periodic Jacobi
// operators a(n+1)u(n+1) + (b(n+1) + b'(n+1))u(n) + a(n)u(n-1) = E u(n),
// their bands via the q-step transfer discriminant, Floquet solutions
// phi(n) = p(n) e^{ikn/q}, and the projective amplitude-phase recursion
//   Z(n+1) = Z(n) [1 - (i b'(n+1) |phi(n)|^2 / omega)(e^{-2i theta(n)} - 1)],
// theta(n) = arg Z(n) + gamma(n), which carries a perturbed solution through
// u(n) = Im[Z(n) phi(n)] at one complex multiply per site.

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "emband/band_structure.hpp"

namespace emband {

class JacobiError : public std::runtime_error {
 public:
  explicit JacobiError(const std::string& what) : std::runtime_error(what) {}
};

// q-periodic coefficients with a(n) > 0. a[m % q] is the bond weight between
// sites m-1 and m, b[m % q] the diagonal entry at site m; both vectors must
// have the same length. Perturbations act on the diagonal only.
struct PeriodicJacobi {
  std::vector<double> a{1.0};
  std::vector<double> b{0.0};

  int q() const { return static_cast<int>(a.size()); }
  double a_at(std::int64_t m) const { return a[index(m)]; }
  double b_at(std::int64_t m) const { return b[index(m)]; }

  static PeriodicJacobi free_chain();                // a = 1, b = 0
  static PeriodicJacobi alternating(double lambda);  // q = 2, b = {0, lambda}

 private:
  std::size_t index(std::int64_t m) const {
    auto q = static_cast<std::int64_t>(a.size());
    return static_cast<std::size_t>(((m % q) + q) % q);
  }
};

// Transfer matrix over one period: maps (u(n), u(n-1)) to (u(n+q), u(n+q-1)).
// det == 1 because the bond weights are q-periodic.
struct JacobiTransfer {
  double m00 = 0, m01 = 0, m10 = 0, m11 = 0;
  double trace() const { return m00 + m11; }
  double det() const { return m00 * m11 - m01 * m10; }
};

JacobiTransfer jacobi_transfer(const PeriodicJacobi& jac, double e);
double jacobi_discriminant(const PeriodicJacobi& jac, double e);

struct JacobiBandOptions {
  int points_per_unit = 400;
  double root_tol = 1e-12;
};

// Bands are the energies with |discriminant| <= 2; edges are bisected to
// root_tol. Same result type as the continuous scan.
BandStructure jacobi_bands(const PeriodicJacobi& jac, double e_min,
                           double e_max, const JacobiBandOptions& opt = {});

// Floquet solution at an energy strictly inside a band: the transfer
// eigenvector for the multiplier e^{ik} or e^{-ik}, continued over one
// period, normalized by |phi(0)|^2 + |phi(1)|^2 = 1 with phi(0) real
// positive, on the branch where the Wronskian constant
//   omega = 2 a(n+1) Im(conj(phi(n)) phi(n+1))
// is positive (the sign of k is whatever that forces). gamma is the
// unwrapped argument of phi; with omega > 0 its per-site increments lie in
// (0, pi), so phi(n+q) = e^{i gamma_period} phi(n) with gamma_period in
// (0, q pi) and gamma_period = +-k mod 2 pi.
struct JacobiFloquet {
  PeriodicJacobi jac;
  double e = 0.0;
  double k = 0.0;             // quasimomentum in (0, pi)
  double omega = 0.0;         // > 0
  double gamma_period = 0.0;  // gamma(n+q) - gamma(n); +-k mod 2 pi

  std::complex<double> phi(std::int64_t n) const;
  double abs2_phi(std::int64_t n) const { return abs2_[rem(n)]; }
  double gamma(std::int64_t n) const;

  double min_abs2() const;
  double max_abs2() const;
  double mean_abs2() const;
  // Distortion between the frame amplitude R = |Z| and the solution norm
  // sqrt(u(n)^2 + u(n-1)^2): each bounds the other within this factor.
  double k_norm() const;

  // Tables over sites 0..q inclusive.
  std::vector<std::complex<double>> phi_;
  std::vector<double> gamma_, abs2_;

 private:
  std::size_t rem(std::int64_t n) const;
};

JacobiFloquet jacobi_floquet(const PeriodicJacobi& jac, double e,
                             double near_edge_tol = 1e-6);

// Projective state at site n: u(n) = Im[Z phi(n)], u(n-1) = Im[Z phi(n-1)].
struct JacobiPruferState {
  std::int64_t n = 0;
  std::complex<double> z{1.0, 0.0};

  double ln_r() const { return std::log(std::abs(z)); }
  double eta() const { return std::arg(z); }
};

// theta(n) = arg Z(n) + gamma(n), the phase the drive feeds on.
double prufer_theta(const JacobiPruferState& s, const JacobiFloquet& jf);

// One site of the perturbed recursion in the Z frame. Two exact identities
// are re-derived from the step and checked at 1e-12 scale every call: the
// amplitude ratio
//   |Z(n+1)/Z(n)|^2 = 1 - (2 b'/omega) sin(2 theta) |phi|^2
//                       + (4 b'^2/omega^2) |phi|^4 sin^2(theta),
// and, away from the cotangent poles, the phase transport
//   cot(eta(n+1) + gamma(n)) = cot(theta(n)) - (2 b'/omega) |phi(n)|^2.
// A violation throws JacobiError (it would mean the step math is broken).
JacobiPruferState prufer_step(const JacobiPruferState& s, double b_prime,
                              const JacobiFloquet& jf);

// Encode a solution sample (u(n), u(n-1)) as Z(n) and decode it back;
// the pair <-> Z map is a bijection with determinant proportional to omega.
JacobiPruferState z_from_solution(double u_n, double u_nm1, std::int64_t n,
                                  const JacobiFloquet& jf);

struct JacobiSolutionPair {
  double u_n = 0.0;
  double u_nm1 = 0.0;
};

JacobiSolutionPair u_from_z(const JacobiPruferState& s,
                            const JacobiFloquet& jf);

}  // namespace emband
