#include "emband/band_structure.hpp"

#include <algorithm>
#include <cmath>

#include "emband/ode.hpp"

namespace emband {

namespace {

// Basis solutions u1 (1,0) and u2 (0,1) of -u'' + V0 u = E u together with
// their E-derivatives w_i'' = (V0 - E) w_i - u_i.
struct MonodromyRhs {
  const PeriodicPotential* v0;
  double e;
  void operator()(double x, const std::vector<double>& y, std::vector<double>& dy) const {
    double q = (*v0)(x) - e;
    dy[0] = y[1];
    dy[1] = q * y[0];
    dy[2] = y[3];
    dy[3] = q * y[2];
    dy[4] = y[5];
    dy[5] = q * y[4] - y[0];
    dy[6] = y[7];
    dy[7] = q * y[6] - y[2];
  }
};

double bisect(const std::function<double(double)>& f, double a, double b, double fa,
              double tol) {
  // Assumes sign change between a and b (fa = f(a)).
  for (int it = 0; it < 200 && (b - a) > tol; ++it) {
    double m = 0.5 * (a + b);
    double fm = f(m);
    if ((fa <= 0 && fm <= 0) || (fa >= 0 && fm >= 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

} // namespace

Monodromy monodromy(const PeriodicPotential& v0, double e, double tol) {
  MonodromyRhs rhs{&v0, e};
  std::vector<double> y = {1, 0, 0, 1, 0, 0, 0, 0};
  OdeOptions opt;
  opt.rtol = tol;
  opt.atol = tol;
  integrate_ode(rhs, 0.0, 1.0, y, opt);
  Monodromy m;
  m.m00 = y[0];
  m.m10 = y[1];
  m.m01 = y[2];
  m.m11 = y[3];
  m.d00 = y[4];
  m.d10 = y[5];
  m.d01 = y[6];
  m.d11 = y[7];
  return m;
}

double discriminant(const PeriodicPotential& v0, double e, double tol) {
  return monodromy(v0, e, tol).trace();
}

void discriminant_scan_serial(const PeriodicPotential& v0, const std::vector<double>& grid,
                              double tol, std::vector<double>& delta,
                              std::vector<double>& ddelta_de) {
  delta.resize(grid.size());
  ddelta_de.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Monodromy m = monodromy(v0, grid[i], tol);
    delta[i] = m.trace();
    ddelta_de[i] = m.trace_de();
  }
}

void discriminant_scan(const PeriodicPotential& v0, const std::vector<double>& grid,
                       double tol, std::vector<double>& delta,
                       std::vector<double>& ddelta_de) {
  delta.resize(grid.size());
  ddelta_de.resize(grid.size());
  const long n = static_cast<long>(grid.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    Monodromy m = monodromy(v0, grid[i], tol);
    delta[i] = m.trace();
    ddelta_de[i] = m.trace_de();
  }
}

BandStructure locate_bands(const PeriodicPotential& v0, double e_min, double e_max,
                           const BandScanOptions& opt) {
  if (!(e_max > e_min)) throw BandError("empty energy range");

  const double span = e_max - e_min;
  const std::size_t n_cells =
      std::max<std::size_t>(8, static_cast<std::size_t>(std::ceil(span * opt.points_per_unit)));
  std::vector<double> grid = uniform_grid(e_min, e_max, n_cells + 1);

  std::vector<double> delta, ddelta;
  if (opt.parallel)
    discriminant_scan(v0, grid, opt.ode_tol, delta, ddelta);
  else
    discriminant_scan_serial(v0, grid, opt.ode_tol, delta, ddelta);

  auto delta_at = [&](double e) { return discriminant(v0, e, opt.ode_tol); };
  auto ddelta_at = [&](double e) { return monodromy(v0, e, opt.ode_tol).trace_de(); };

  auto inside = [&](std::size_t i) { return std::fabs(delta[i]) <= 2.0; };

  BandStructure bs;
  bs.e_min = e_min;
  bs.e_max = e_max;
  bs.root_tol = opt.root_tol;

  std::size_t i = 0;
  const std::size_t n = grid.size();
  while (i < n) {
    if (!inside(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && inside(j + 1)) ++j;

    Band band;
    if (i == 0) {
      band.lo = grid.front();
      band.truncated_lo = true;
    } else {
      double c = delta[i - 1] > 2.0 ? 2.0 : -2.0;
      auto f = [&](double e) { return delta_at(e) - c; };
      band.lo = bisect(f, grid[i - 1], grid[i], delta[i - 1] - c, opt.root_tol);
    }
    if (j == n - 1) {
      band.hi = grid.back();
      band.truncated_hi = true;
    } else {
      double c = delta[j + 1] > 2.0 ? 2.0 : -2.0;
      auto f = [&](double e) { return delta_at(e) - c; };
      // Bracket oriented from inside the band outward.
      double fa = delta[j] - c;
      band.hi = bisect(f, grid[j], grid[j + 1], fa, opt.root_tol);
    }

    // Critical points of Delta inside the run mark touching bands (closed
    // gaps) when |Delta| returns to 2 without leaving the band.
    std::vector<double> splits;
    for (std::size_t m = i; m < j; ++m) {
      double s0 = ddelta[m], s1 = ddelta[m + 1];
      if (s0 == 0.0 && s1 == 0.0) continue;
      if (s0 * s1 > 0.0) continue;
      auto fd = [&](double e) { return ddelta_at(e); };
      double estar = bisect(fd, grid[m], grid[m + 1], s0, opt.root_tol);
      double dstar = delta_at(estar);
      double excess = std::fabs(dstar) - 2.0;
      if (std::fabs(excess) <= opt.closed_gap_tol) {
        splits.push_back(estar);
      } else if (excess > 0.0) {
        throw BandError("unresolved band edge near E=" + std::to_string(estar) +
                        "; refine the scan grid");
      }
      // excess < 0: interior extremum of Delta, no action.
    }
    std::sort(splits.begin(), splits.end());

    double lo = band.lo;
    for (std::size_t s = 0; s <= splits.size(); ++s) {
      Band piece = band;
      piece.lo = lo;
      piece.hi = (s < splits.size()) ? splits[s] : band.hi;
      piece.truncated_lo = band.truncated_lo && s == 0;
      piece.truncated_hi = band.truncated_hi && s == splits.size();
      if (piece.hi > piece.lo) {
        double mid = 0.5 * (piece.lo + piece.hi);
        piece.k_increasing = ddelta_at(mid) < 0.0;
        bs.bands.push_back(piece);
      }
      lo = piece.hi;
    }

    i = j + 1;
  }

  return bs;
}

double quasimomentum(const PeriodicPotential& v0, double e, double tol, double near_edge_tol) {
  double d = discriminant(v0, e, tol);
  if (std::fabs(d) > 2.0 - near_edge_tol)
    throw BandError("energy E=" + std::to_string(e) +
                    " is outside a band interior (|Delta|=" + std::to_string(std::fabs(d)) +
                    ")");
  return std::acos(0.5 * d);
}

double energy_at_quasimomentum(const PeriodicPotential& v0, const Band& band,
                               double k_target, double tol) {
  if (!(k_target > 0.0 && k_target < M_PI))
    throw BandError("target quasimomentum must lie in (0, pi)");
  double c = 2.0 * std::cos(k_target);
  auto f = [&](double e) { return discriminant(v0, e, tol) - c; };
  double a = band.lo, b = band.hi;
  double fa = f(a);
  double fb = f(b);
  if (fa * fb > 0) {
    // Nudge off edges where Delta sits exactly at +-2.
    double pad = 1e-9 * std::max(1.0, b - a);
    a += pad;
    b -= pad;
    fa = f(a);
    fb = f(b);
    if (fa * fb > 0) throw BandError("quasimomentum target not bracketed by band");
  }
  return bisect(f, a, b, fa, tol);
}

} // namespace emband
