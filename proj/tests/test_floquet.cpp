#include "doctest.h"

#include <cmath>
#include <complex>

#include "emband/floquet.hpp"

using namespace emband;

TEST_CASE("free Bloch data at E=1: unit phase speed") {
  auto v0 = PeriodicPotential::zero();
  FloquetData fd = floquet_solution(v0, 1.0);

  CHECK(fd.k == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fd.rho == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(fd.omega == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(fd.g_bound == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(fd.k_norm == doctest::Approx(2.0).epsilon(1e-6));

  for (double x : {0.0, 0.37, 1.4, 5.25}) {
    CHECK(fd.gamma_prime(x) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(fd.abs2_phi(x) == doctest::Approx(0.5).epsilon(1e-8));
  }
  // gamma advances linearly; the periodic remainder is constant.
  CHECK(fd.gamma(2.5) - fd.gamma(0.0) == doctest::Approx(2.5).epsilon(1e-8));
}

TEST_CASE("free Bloch data at E=4: gamma' = 2") {
  auto v0 = PeriodicPotential::zero();
  FloquetData fd = floquet_solution(v0, 4.0);
  CHECK(fd.k == doctest::Approx(2.0).epsilon(1e-10));
  for (double x : {0.1, 0.77, 3.3})
    CHECK(fd.gamma_prime(x) == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("second band free energy uses the positive-rotation branch") {
  auto v0 = PeriodicPotential::zero();
  double e = 22.0;
  FloquetData fd = floquet_solution(v0, e);
  double root = std::sqrt(e);
  CHECK(fd.k == doctest::Approx(2 * M_PI - root).epsilon(1e-9));
  // Positive-omega solution is e^{i sqrt(E) x}: phase advance sqrt(E).
  CHECK(fd.rho == doctest::Approx(root).epsilon(1e-8));
  for (double x : {0.2, 0.9})
    CHECK(fd.gamma_prime(x) == doctest::Approx(root).epsilon(1e-7));
  CHECK(fd.omega > 0);
}

TEST_CASE("Bloch solution satisfies the ODE and Floquet relation") {
  auto v0 = PeriodicPotential::cosine(2.0, 1);
  double e = 2.0;
  FloquetData fd = floquet_solution(v0, e);

  CHECK(fd.omega > 0);
  CHECK(fd.g_bound >= 1.0);

  // phi(x+1) = e^{i rho} phi(x) to interpolation accuracy.
  std::complex<double> mult = std::polar(1.0, fd.rho);
  for (double x : {0.0, 0.31, 0.62, 0.95}) {
    auto lhs = fd.phi(x + 1.0);
    auto rhs = mult * fd.phi(x);
    CHECK(std::abs(lhs - rhs) < 1e-7);
  }

  // Finite-difference second derivative matches (V0 - E) phi.
  double h = 1e-4;
  for (double x : {0.2, 0.55, 0.83}) {
    auto second = (fd.phi(x + h) - 2.0 * fd.phi(x) + fd.phi(x - h)) / (h * h);
    auto expect = (v0(x) - e) * fd.phi(x);
    CHECK(std::abs(second - expect) < 1e-4);
  }

  // gamma' = omega / |phi|^2 stays within the certified corridor.
  for (double x = 0.0; x < 1.0; x += 0.013) {
    double gp = fd.gamma_prime(x);
    CHECK(gp >= 1.0 / fd.g_bound - 1e-9);
    CHECK(gp <= fd.g_bound + 1e-9);
  }

  // Independent check over [0,2]: gamma(x+1) - gamma(x) = rho, and rho = +-k
  // modulo 2 pi.
  double r1 = std::fabs(std::remainder(fd.rho - fd.k, 2 * M_PI));
  double r2 = std::fabs(std::remainder(fd.rho + fd.k, 2 * M_PI));
  CHECK(std::min(r1, r2) < 1e-7);
  CHECK(fd.gamma(1.7) - fd.gamma(0.7) == doctest::Approx(fd.rho).epsilon(1e-9));
}

TEST_CASE("floquet_solution rejects energies at or outside band edges") {
  auto v0 = PeriodicPotential::zero();
  CHECK_THROWS_AS(floquet_solution(v0, -2.0), BandError);
  CHECK_THROWS_AS(floquet_solution(v0, M_PI * M_PI), BandError);
}
