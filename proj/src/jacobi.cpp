#include "emband/jacobi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace emband {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_valid(const PeriodicJacobi& jac) {
  if (jac.a.empty() || jac.a.size() != jac.b.size())
    throw JacobiError("coefficient arrays must be nonempty and equally long");
  for (double an : jac.a)
    if (!(an > 0)) throw JacobiError("bond weights must be positive");
}

// Divide with floor semantics; n may be negative.
void floor_divmod(std::int64_t n, std::int64_t q, std::int64_t& div,
                  std::int64_t& rem) {
  div = n / q;
  rem = n % q;
  if (rem < 0) {
    rem += q;
    div -= 1;
  }
}

}  // namespace

PeriodicJacobi PeriodicJacobi::free_chain() { return PeriodicJacobi{}; }

PeriodicJacobi PeriodicJacobi::alternating(double lambda) {
  PeriodicJacobi jac;
  jac.a = {1.0, 1.0};
  jac.b = {0.0, lambda};
  return jac;
}

JacobiTransfer jacobi_transfer(const PeriodicJacobi& jac, double e) {
  require_valid(jac);
  // One site: (u(n+1), u(n)) = S(n) (u(n), u(n-1)) with
  // S(n) = [[(E - b(n+1))/a(n+1), -a(n)/a(n+1)], [1, 0]].
  double m00 = 1, m01 = 0, m10 = 0, m11 = 1;
  for (int n = 0; n < jac.q(); ++n) {
    const double an1 = jac.a_at(n + 1);
    const double s00 = (e - jac.b_at(n + 1)) / an1;
    const double s01 = -jac.a_at(n) / an1;
    const double t00 = s00 * m00 + s01 * m10;
    const double t01 = s00 * m01 + s01 * m11;
    m10 = m00;
    m11 = m01;
    m00 = t00;
    m01 = t01;
  }
  return JacobiTransfer{m00, m01, m10, m11};
}

double jacobi_discriminant(const PeriodicJacobi& jac, double e) {
  return jacobi_transfer(jac, e).trace();
}

namespace {

double bisect_edge(const PeriodicJacobi& jac, double target, double lo,
                   double hi, double tol) {
  double flo = jacobi_discriminant(jac, lo) - target;
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = jacobi_discriminant(jac, mid) - target;
    if ((flo <= 0) == (fm <= 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

BandStructure jacobi_bands(const PeriodicJacobi& jac, double e_min,
                           double e_max, const JacobiBandOptions& opt) {
  require_valid(jac);
  if (!(e_max > e_min)) throw JacobiError("band scan needs e_max > e_min");

  BandStructure out;
  out.e_min = e_min;
  out.e_max = e_max;
  out.root_tol = opt.root_tol;

  const int npts = std::max(
      33, static_cast<int>((e_max - e_min) * opt.points_per_unit) + 1);
  std::vector<double> grid(static_cast<std::size_t>(npts)), delta(grid.size());
  for (int i = 0; i < npts; ++i) {
    grid[static_cast<std::size_t>(i)] =
        e_min + (e_max - e_min) * i / (npts - 1);
    delta[static_cast<std::size_t>(i)] =
        jacobi_discriminant(jac, grid[static_cast<std::size_t>(i)]);
  }

  // Edges are simple roots of Delta -+ 2; collect both families, then read
  // off in-band intervals by midpoint membership.
  std::vector<double> edges;
  for (double target : {2.0, -2.0}) {
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      const double f0 = delta[i] - target, f1 = delta[i + 1] - target;
      if (f0 == 0.0) edges.push_back(grid[i]);
      if ((f0 < 0) != (f1 < 0))
        edges.push_back(
            bisect_edge(jac, target, grid[i], grid[i + 1], opt.root_tol));
    }
  }
  if (delta.back() == 2.0 || delta.back() == -2.0) edges.push_back(e_max);
  edges.push_back(e_min);
  edges.push_back(e_max);
  std::sort(edges.begin(), edges.end());

  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double lo = edges[i], hi = edges[i + 1];
    if (hi - lo <= opt.root_tol) continue;
    const double dm = jacobi_discriminant(jac, 0.5 * (lo + hi));
    if (std::abs(dm) > 2.0) continue;
    Band band;
    band.lo = lo;
    band.hi = hi;
    band.truncated_lo = (i == 0);
    band.truncated_hi = (i + 2 == edges.size());
    // k = arccos(Delta/2) rises where Delta falls.
    const double d1 = jacobi_discriminant(jac, lo + 0.25 * (hi - lo));
    const double d3 = jacobi_discriminant(jac, lo + 0.75 * (hi - lo));
    band.k_increasing = d3 < d1;
    out.bands.push_back(band);
  }
  return out;
}

std::size_t JacobiFloquet::rem(std::int64_t n) const {
  std::int64_t d = 0, r = 0;
  floor_divmod(n, jac.q(), d, r);
  return static_cast<std::size_t>(r);
}

std::complex<double> JacobiFloquet::phi(std::int64_t n) const {
  std::int64_t d = 0, r = 0;
  floor_divmod(n, jac.q(), d, r);
  return std::polar(1.0, gamma_period * static_cast<double>(d)) *
         phi_[static_cast<std::size_t>(r)];
}

double JacobiFloquet::gamma(std::int64_t n) const {
  std::int64_t d = 0, r = 0;
  floor_divmod(n, jac.q(), d, r);
  return gamma_period * static_cast<double>(d) +
         gamma_[static_cast<std::size_t>(r)];
}

double JacobiFloquet::min_abs2() const {
  return *std::min_element(abs2_.begin(), abs2_.end() - 1);
}

double JacobiFloquet::max_abs2() const {
  return *std::max_element(abs2_.begin(), abs2_.end() - 1);
}

double JacobiFloquet::mean_abs2() const {
  double s = 0;
  for (int r = 0; r < jac.q(); ++r) s += abs2_[static_cast<std::size_t>(r)];
  return s / jac.q();
}

double JacobiFloquet::k_norm() const {
  // |u(n)| <= R |phi(n)| gives the upper route; the inverse encoding
  // R <= (2/omega) a(n) (|phi(n-1)||u(n)| + |phi(n)||u(n-1)|) the lower.
  const double pmax = std::sqrt(max_abs2());
  const double amax = *std::max_element(jac.a.begin(), jac.a.end());
  const double up = std::sqrt(2.0) * pmax;
  const double down = 2.0 * std::sqrt(2.0) * amax * pmax / omega;
  return std::max(up, down);
}

JacobiFloquet jacobi_floquet(const PeriodicJacobi& jac, double e,
                             double near_edge_tol) {
  require_valid(jac);
  const JacobiTransfer tr = jacobi_transfer(jac, e);
  const double disc = tr.trace();
  if (!(std::abs(disc) <= 2.0 - near_edge_tol)) {
    std::ostringstream os;
    os << "energy " << e << " is not strictly inside a band (discriminant "
       << disc << ")";
    throw JacobiError(os.str());
  }

  JacobiFloquet jf;
  jf.jac = jac;
  jf.e = e;
  jf.k = std::acos(0.5 * disc);
  const std::complex<double> mult = std::polar(1.0, jf.k);

  // Eigenvector (phi(0), phi(-1)) for the multiplier, from whichever
  // off-diagonal row is better conditioned.
  std::complex<double> p0, pm1;
  if (std::abs(tr.m01) >= std::abs(tr.m10)) {
    p0 = tr.m01;
    pm1 = mult - tr.m00;
  } else {
    p0 = mult - tr.m11;
    pm1 = tr.m10;
  }

  const int q = jac.q();
  std::vector<std::complex<double>> phi(static_cast<std::size_t>(q) + 1);
  phi[0] = p0;
  std::complex<double> prev = pm1;
  for (int n = 0; n < q; ++n) {
    const std::complex<double> next =
        ((e - jac.b_at(n + 1)) * phi[static_cast<std::size_t>(n)] -
         jac.a_at(n) * prev) /
        jac.a_at(n + 1);
    prev = phi[static_cast<std::size_t>(n)];
    phi[static_cast<std::size_t>(n) + 1] = next;
  }
  double scale = 0;
  for (const auto& p : phi) scale = std::max(scale, std::abs(p));
  if (std::abs(phi[static_cast<std::size_t>(q)] - mult * phi[0]) >
      1e-9 * scale)
    throw JacobiError("transfer eigenvector failed to close the period");

  const double norm = std::sqrt(std::norm(phi[0]) + std::norm(phi[1]));
  for (auto& p : phi) p /= norm;

  // Positive-Wronskian branch; conjugating flips the Floquet multiplier
  // to exp(-ik), which happens on bands where k falls as the energy rises.
  std::complex<double> bloch = mult;
  double omega = 2.0 * jac.a_at(1) * std::imag(std::conj(phi[0]) * phi[1]);
  if (omega < 0) {
    for (auto& p : phi) p = std::conj(p);
    omega = -omega;
    bloch = std::conj(bloch);
  }
  if (!(omega > 0))
    throw JacobiError("degenerate Wronskian; energy too close to a band edge");

  // Global phase: phi(0) real positive, so gamma(0) = 0.
  const std::complex<double> rot = std::conj(phi[0]) / std::abs(phi[0]);
  for (auto& p : phi) p *= rot;

  jf.phi_ = phi;
  jf.omega = omega;
  jf.abs2_.resize(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) jf.abs2_[i] = std::norm(phi[i]);

  jf.gamma_.assign(phi.size(), 0.0);
  for (int n = 0; n < q; ++n) {
    const auto i = static_cast<std::size_t>(n);
    const double wr =
        2.0 * jac.a_at(n + 1) * std::imag(std::conj(phi[i]) * phi[i + 1]);
    if (std::abs(wr - omega) > 1e-10 * (1.0 + omega))
      throw JacobiError("Wronskian drifted along the period");
    const double inc = std::arg(phi[i + 1] / phi[i]);
    if (!(inc > 0 && inc < kPi))
      throw JacobiError("phase increment left (0, pi)");
    jf.gamma_[i + 1] = jf.gamma_[i] + inc;
  }
  jf.gamma_period = jf.gamma_[static_cast<std::size_t>(q)];
  if (std::abs(std::polar(1.0, jf.gamma_period) - bloch) > 1e-9)
    throw JacobiError("period phase advance disagrees with the multiplier");
  return jf;
}

double prufer_theta(const JacobiPruferState& s, const JacobiFloquet& jf) {
  return std::arg(s.z) + jf.gamma(s.n);
}

JacobiPruferState prufer_step(const JacobiPruferState& s, double b_prime,
                              const JacobiFloquet& jf) {
  if (b_prime == 0.0) return JacobiPruferState{s.n + 1, s.z};

  const double a2 = jf.abs2_phi(s.n);
  const double beta = b_prime * a2 / jf.omega;
  const double th = std::arg(s.z) + jf.gamma(s.n);
  const std::complex<double> factor =
      1.0 -
      std::complex<double>(0.0, beta) * (std::polar(1.0, -2.0 * th) - 1.0);
  JacobiPruferState out{s.n + 1, s.z * factor};

  const double st = std::sin(th);
  const double ratio = std::norm(factor);
  const double pred =
      1.0 - 2.0 * beta * std::sin(2.0 * th) + 4.0 * beta * beta * st * st;
  if (std::abs(ratio - pred) > 1e-12 * (1.0 + std::abs(pred)))
    throw JacobiError("amplitude-ratio identity violated in prufer_step");

  const double th1 = std::arg(out.z) + jf.gamma(s.n);
  const double st1 = std::sin(th1);
  if (std::abs(st) > 0.01 && std::abs(st1) > 0.01) {
    const double lhs = std::cos(th1) / st1;
    const double rhs = std::cos(th) / st - 2.0 * beta;
    // cot conditioning: an angle error eps moves cot by (1 + cot^2) eps, and
    // the summed phase itself carries |th| ulps of rounding.
    const double cond = 2.0 + lhs * lhs + rhs * rhs + 4.0 * beta * beta;
    if (std::abs(lhs - rhs) > cond * (1e-12 + std::abs(th) * 2e-16))
      throw JacobiError("cotangent transport identity violated in prufer_step");
  }
  return out;
}

JacobiPruferState z_from_solution(double u_n, double u_nm1, std::int64_t n,
                                  const JacobiFloquet& jf) {
  const std::complex<double> z =
      2.0 / jf.omega * jf.jac.a_at(n) *
      (std::conj(jf.phi(n - 1)) * u_n - std::conj(jf.phi(n)) * u_nm1);
  return JacobiPruferState{n, z};
}

JacobiSolutionPair u_from_z(const JacobiPruferState& s,
                            const JacobiFloquet& jf) {
  JacobiSolutionPair out;
  out.u_n = std::imag(s.z * jf.phi(s.n));
  out.u_nm1 = std::imag(s.z * jf.phi(s.n - 1));
  return out;
}

}  // namespace emband
