#include "doctest.h"

#include <cmath>
#include <vector>

#include "emband/band_structure.hpp"
#include "emband/periodic_potential.hpp"

using namespace emband;

namespace {

// Independent oracle: classical fixed-step RK4 on the basis system at high
// resolution, giving the discriminant without the adaptive machinery.
double rk4_discriminant(const PeriodicPotential& v0, double e, int nsteps) {
  auto deriv = [&](double x, const std::array<double, 4>& y) {
    double q = v0(x) - e;
    return std::array<double, 4>{y[1], q * y[0], y[3], q * y[2]};
  };
  std::array<double, 4> y = {1, 0, 0, 1};
  double h = 1.0 / nsteps;
  for (int i = 0; i < nsteps; ++i) {
    double x = i * h;
    auto k1 = deriv(x, y);
    std::array<double, 4> t;
    for (int j = 0; j < 4; ++j) t[j] = y[j] + 0.5 * h * k1[j];
    auto k2 = deriv(x + 0.5 * h, t);
    for (int j = 0; j < 4; ++j) t[j] = y[j] + 0.5 * h * k2[j];
    auto k3 = deriv(x + 0.5 * h, t);
    for (int j = 0; j < 4; ++j) t[j] = y[j] + h * k3[j];
    auto k4 = deriv(x + h, t);
    for (int j = 0; j < 4; ++j)
      y[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return y[0] + y[3];
}

} // namespace

TEST_CASE("free discriminant matches 2 cos(sqrt(E))") {
  auto v0 = PeriodicPotential::zero();
  for (double e : {0.3, 1.0, 4.0, 10.0, 25.0, 47.0}) {
    double d = discriminant(v0, e);
    CHECK(d == doctest::Approx(2.0 * std::cos(std::sqrt(e))).epsilon(1e-9));
  }
  // Below the spectrum the discriminant grows as 2 cosh(sqrt(-E)).
  CHECK(discriminant(v0, -1.0) ==
        doctest::Approx(2.0 * std::cosh(1.0)).epsilon(1e-9));
}

TEST_CASE("monodromy has unit determinant and correct dDelta/dE") {
  auto v0 = PeriodicPotential::cosine(2.0, 1);
  for (double e : {0.5, 3.0, 12.0, 30.0}) {
    Monodromy m = monodromy(v0, e);
    CHECK(std::fabs(m.det() - 1.0) < 1e-9);
    double h = 1e-5;
    double fd = (discriminant(v0, e + h) - discriminant(v0, e - h)) / (2 * h);
    CHECK(m.trace_de() == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("cosine discriminant agrees with fixed-step RK4 oracle") {
  auto v0 = PeriodicPotential::cosine(2.0, 1);
  for (double e : {0.7, 2.5, 9.0, 21.0}) {
    double d_oracle = rk4_discriminant(v0, e, 40000);
    CHECK(discriminant(v0, e) == doctest::Approx(d_oracle).epsilon(1e-9));
  }
}

TEST_CASE("free operator bands split at the touching points m^2 pi^2") {
  auto v0 = PeriodicPotential::zero();
  BandStructure bs = locate_bands(v0, 0.0, 50.0);
  REQUIRE(bs.bands.size() == 3);
  const double pi2 = M_PI * M_PI;

  CHECK(std::fabs(bs.bands[0].lo - 0.0) < 1e-6);
  CHECK(bs.bands[0].truncated_lo);
  CHECK(std::fabs(bs.bands[0].hi - pi2) < 1e-8);
  CHECK(std::fabs(bs.bands[1].lo - pi2) < 1e-8);
  CHECK(std::fabs(bs.bands[1].hi - 4 * pi2) < 1e-8);
  CHECK(std::fabs(bs.bands[2].lo - 4 * pi2) < 1e-8);
  CHECK(bs.bands[2].truncated_hi);
  CHECK(bs.bands[2].hi == doctest::Approx(50.0));

  // Touching bands share the split point exactly.
  CHECK(bs.bands[0].hi == bs.bands[1].lo);

  // Alternating fold direction of k across consecutive bands.
  CHECK(bs.bands[0].k_increasing);
  CHECK_FALSE(bs.bands[1].k_increasing);
  CHECK(bs.bands[2].k_increasing);
}

TEST_CASE("parallel and serial discriminant scans agree bitwise") {
  auto v0 = PeriodicPotential::cosine(1.5, 1);
  std::vector<double> grid;
  for (int i = 0; i <= 200; ++i) grid.push_back(0.05 * i);
  std::vector<double> d1, dd1, d2, dd2;
  discriminant_scan(v0, grid, 1e-10, d1, dd1);
  discriminant_scan_serial(v0, grid, 1e-10, d2, dd2);
  REQUIRE(d1.size() == d2.size());
  for (std::size_t i = 0; i < d1.size(); ++i) {
    CHECK(d1[i] == d2[i]);
    CHECK(dd1[i] == dd2[i]);
  }
}

TEST_CASE("cosine background opens a gap and bands stay ordered") {
  auto v0 = PeriodicPotential::cosine(2.0, 1);
  BandStructure bs = locate_bands(v0, -3.0, 50.0);
  REQUIRE(bs.bands.size() >= 3);
  for (std::size_t i = 0; i < bs.bands.size(); ++i) {
    CHECK(bs.bands[i].hi > bs.bands[i].lo);
    if (i > 0) CHECK(bs.bands[i].lo >= bs.bands[i - 1].hi - 1e-12);
  }
  // First gap of the amp-2 cosine background is open: strict separation.
  CHECK(bs.bands[1].lo - bs.bands[0].hi > 0.1);

  // Edges are discriminant roots: |Delta| = 2 at each refined edge.
  for (const Band& b : bs.bands) {
    if (!b.truncated_lo)
      CHECK(std::fabs(std::fabs(discriminant(v0, b.lo)) - 2.0) < 1e-6);
    if (!b.truncated_hi)
      CHECK(std::fabs(std::fabs(discriminant(v0, b.hi)) - 2.0) < 1e-6);
  }

  // Oracle cross-check of the lowest non-truncated edge via the RK4
  // discriminant: bisect |Delta_oracle| - 2 around the refined edge.
  double e_edge = bs.bands[0].hi;
  double lo = e_edge - 1e-3, hi = e_edge + 1e-3;
  double flo = std::fabs(rk4_discriminant(v0, lo, 20000)) - 2.0;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    double fm = std::fabs(rk4_discriminant(v0, mid, 20000)) - 2.0;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  CHECK(std::fabs(0.5 * (lo + hi) - e_edge) < 1e-7);
}

TEST_CASE("quasimomentum calibration on the free operator") {
  auto v0 = PeriodicPotential::zero();
  // Band 0: k = sqrt(E).
  for (double e : {0.25, 0.5, 1.0, 2.0, 4.0, 7.0}) {
    CHECK(quasimomentum(v0, e) == doctest::Approx(std::sqrt(e)).epsilon(1e-8));
  }
  // Band 1: the fold k = 2 pi - sqrt(E).
  for (double e : {12.0, 22.0, 30.0}) {
    CHECK(quasimomentum(v0, e) ==
          doctest::Approx(2 * M_PI - std::sqrt(e)).epsilon(1e-8));
  }
  // Strict monotonicity along 20 interior points of band 0.
  double prev = 0.0;
  for (int i = 1; i <= 20; ++i) {
    double e = 0.4 + (M_PI * M_PI - 0.8) * i / 21.0;
    double k = quasimomentum(v0, e);
    CHECK(k > prev);
    prev = k;
  }
  CHECK_THROWS_AS(quasimomentum(v0, M_PI * M_PI), BandError);
  CHECK_THROWS_AS(quasimomentum(v0, -0.5), BandError);
}

TEST_CASE("energy_at_quasimomentum inverts k on a band") {
  auto v0 = PeriodicPotential::zero();
  BandStructure bs = locate_bands(v0, 0.0, 12.0);
  REQUIRE(!bs.bands.empty());
  double e = energy_at_quasimomentum(v0, bs.bands[0], 0.7);
  CHECK(e == doctest::Approx(0.49).epsilon(1e-8));
}
