#pragma once

// Spectral bands of the periodic operator -u'' + V0 u via the discriminant
// Delta(E) = tr M(E) of the period monodromy matrix M. A point E is inside
// a band iff |Delta(E)| <= 2; the quasimomentum there is arccos(Delta/2).
//
// locate_bands scans a uniform energy grid (parallel kernel with a serial
// reference twin), refines edges by bisection to root_tol, and resolves
// touching bands (closed gaps) through critical points of Delta computed
// from the variational derivative dDelta/dE.

#include <stdexcept>
#include <string>
#include <vector>

#include "emband/periodic_potential.hpp"

namespace emband {

class BandError : public std::runtime_error {
 public:
  explicit BandError(const std::string& what) : std::runtime_error(what) {}
};

struct Monodromy {
  // M maps (u(x0), u'(x0)) to (u(x0+1), u'(x0+1)); row-major entries.
  double m00 = 0, m01 = 0, m10 = 0, m11 = 0;
  // dM/dE from the variational system.
  double d00 = 0, d01 = 0, d10 = 0, d11 = 0;

  double trace() const { return m00 + m11; }
  double trace_de() const { return d00 + d11; }
  double det() const { return m00 * m11 - m01 * m10; }
};

Monodromy monodromy(const PeriodicPotential& v0, double e, double tol = 1e-10);
double discriminant(const PeriodicPotential& v0, double e, double tol = 1e-10);

struct Band {
  double lo = 0.0;
  double hi = 0.0;
  bool k_increasing = true;   // quasimomentum rises from 0 to pi across the band
  bool truncated_lo = false;  // band clipped by the scan range
  bool truncated_hi = false;
};

struct BandStructure {
  std::vector<Band> bands;
  double e_min = 0.0, e_max = 0.0;
  double root_tol = 1e-10;
};

// Discriminant (and its E-derivative) on a grid of energies. The parallel
// kernel writes per-slot results, so thread count never changes the output.
void discriminant_scan_serial(const PeriodicPotential& v0, const std::vector<double>& grid,
                              double tol, std::vector<double>& delta,
                              std::vector<double>& ddelta_de);
void discriminant_scan(const PeriodicPotential& v0, const std::vector<double>& grid,
                       double tol, std::vector<double>& delta,
                       std::vector<double>& ddelta_de);

struct BandScanOptions {
  int points_per_unit = 400;
  double root_tol = 1e-10;
  double ode_tol = 1e-10;
  double closed_gap_tol = 1e-8;  // |Delta| - 2 below this at a critical point: touching bands
  bool parallel = true;
};

BandStructure locate_bands(const PeriodicPotential& v0, double e_min, double e_max,
                           const BandScanOptions& opt = {});

// Quasimomentum k(E) = arccos(Delta/2) for E strictly inside a band
// (|Delta| <= 2 - near_edge_tol, default 1e-6).
double quasimomentum(const PeriodicPotential& v0, double e, double tol = 1e-10,
                     double near_edge_tol = 1e-6);

// Inverts k(E) on one band by bisection (k is strictly monotone there).
double energy_at_quasimomentum(const PeriodicPotential& v0, const Band& band,
                               double k_target, double tol = 1e-10);

} // namespace emband
