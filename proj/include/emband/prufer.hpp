#pragma once

// Phase-amplitude integration of -u'' + (V0 + V) u = E u relative to a
// Bloch frame of the background operator: evolve (ln R, theta), reconstruct
// (u, u'), plus an independent direct second-order solver for cross-checks.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "emband/floquet.hpp"
#include "emband/periodic_potential.hpp"

namespace emband {

struct BoundaryCondition {
  double theta0 = 0.0;  // u'(a)/u(a) = tan(theta0); theta0 = pi/2 means u(a) = 0
  double a = 0.0;

  // Unit direction (u(a), u'(a)); the theta0 = pi/2 case is the exact
  // vertical direction (0, 1), never a tangent evaluation.
  std::array<double, 2> direction() const;
};

struct PruferTrajectory {
  std::vector<double> grid;   // strictly increasing
  std::vector<double> ln_r;   // ln R at grid points, ln R(x0) = 0
  std::vector<double> theta;  // unwrapped phase at grid points
  double energy = 0.0;
  std::string floquet_ref;
};

struct PruferOptions {
  double ode_tol = 1e-10;
  std::size_t n_samples = 0;  // 0: choose from phase advance and range
};

struct SolutionSamples {
  std::vector<double> grid;
  std::vector<double> u;
  std::vector<double> du;
};

// Phase psi0 in [0, 2pi) such that R(a) = 1, theta(a) = psi0 reproduces the
// boundary direction of bc in the frame of fd. Exact 2x2 solve; the matrix
// determinant is -omega != 0, so no root finding is needed.
double initial_prufer_angle(const BoundaryCondition& bc, const FloquetData& fd);

// Integrates theta' = gamma' - V/gamma' sin^2(theta) and
// [ln R]' = V/(2 gamma') sin(2 theta) from theta(x0) = psi0, ln R(x0) = 0.
// (The two prefactors differ by the factor 2; both are forced by the pairing
// u = Im(z phi), u' = Im(z phi') and are cross-checked against direct
// integration in the tests.) The integrated state is sigma = theta - gamma.
PruferTrajectory integrate_prufer(const FloquetData& fd,
                                  const std::function<double(double)>& v,
                                  double x0, double x1, double psi0,
                                  const PruferOptions& opt = {});

// u = Im(z phi), u' = Im(z phi') with z = R exp(i (theta - gamma)); equals
// u = R |phi| sin(theta) with the matched derivative pairing.
SolutionSamples reconstruct_solution(const PruferTrajectory& traj,
                                     const FloquetData& fd);

// Direct integration of -u'' + (V0 + V) u = E u from bc; samples (u, u') on
// a uniform grid over [x0, x1]. Requires bc.a <= x0.
SolutionSamples direct_solve(const PeriodicPotential& v0,
                             const std::function<double(double)>& v, double e,
                             const BoundaryCondition& bc, double x0, double x1,
                             const PruferOptions& opt = {});

}  // namespace emband
