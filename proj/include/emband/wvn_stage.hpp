#pragma once

// Single-stage Wigner-von Neumann perturbation: a resonant drive
// V(x) = -C cutoff(x) sin(2 theta(x)) / (1 + x - b) built from the
// self-consistent phase flow of one target energy, together with the
// contract checks (target decay, protected-energy stability, oscillation
// cancellation) that the multi-stage assembly relies on.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "emband/floquet.hpp"

namespace emband {

class StageError : public std::runtime_error {
 public:
  explicit StageError(const std::string& what) : std::runtime_error(what) {}
};

// Smooth step: 0 for t <= 0, 1 for t >= 1, exp(-1/t)-based in between; all
// derivatives vanish at both ends.
double mollifier_step(double t);

// mollifier_step((x-x0)/w) * mollifier_step((x1-x)/w): identically 1 on
// [x0+w, x1-w], vanishing to all orders at x0 and x1.
double stage_cutoff(double x, double x0, double x1, double w);

struct Stage {
  double e_target = 0.0;
  std::vector<double> protected_energies;
  double x0 = 0.0;
  double x1 = 0.0;
  double b = 0.0;          // offset, b < x0
  double theta0 = 0.0;     // boundary angle at x0: u'(x0)/u(x0) = tan(theta0)
  double c = 8.0;          // drive coupling
  double mollify_width = 0.0;  // 0: use min(1, (x1-x0)/100)

  double width() const;
};

struct StageOptions {
  double ode_tol = 1e-10;
  double k_min = 1000.0;      // contract-grade admissibility floor for x0 - b
  double angular_tol = 1e-6;  // resonance rejection tolerance
  std::size_t n_samples = 513;
  double slope_slack_factor = 0.1;  // assert slope <= -D (1 - factor)
  bool parallel = true;             // probe batches
};

// Hard invariants: b < x0 < x1, coupling >= 0, quasimomentum of the target
// away from pi/2, protected quasimomenta away from k and from pi - k.
// enforce_k_min additionally requires x0 - b > k_min (contract-grade stages).
void validate_stage(const Stage& stage, double k_target,
                    const std::vector<double>& k_protected,
                    const StageOptions& opt, bool enforce_k_min);

// Matched trajectory of the stage flow
//   theta' = gamma' + C cutoff(x) sin(2 theta) sin^2(theta)/(gamma' (1+x-b)),
// which is the exact phase dynamics of the emitted potential, plus the
// nonpositive log-amplitude of the matched solution,
//   [ln R]' = -C cutoff(x) sin^2(2 theta) / (2 gamma' (1+x-b)).
// Samples lie on a geometric grid in 1+x-b (natural for decay-slope fits).
struct StageTrajectory {
  std::vector<double> grid;
  std::vector<double> theta;  // unwrapped drive phase
  std::vector<double> ln_r;   // matched target, ln R(x0) = 0
  double e = 0.0;
  double b = 0.0;
  double c = 0.0;
  double x0 = 0.0, x1 = 0.0;
  double width = 0.0;
  double psi0 = 0.0;  // theta(x0)
};

StageTrajectory solve_stage_theta(const Stage& stage, const FloquetData& fd,
                                  const StageOptions& opt = {});
// Same, but with the frame phase at x0 given directly (assembly joints hand
// over the running phase and never round-trip through tan).
StageTrajectory solve_stage_theta_from_phase(const Stage& stage,
                                             const FloquetData& fd,
                                             double psi0,
                                             const StageOptions& opt = {});

// Evaluates the emitted stage potential anywhere. Between stored phase
// anchors the drive is re-integrated on demand, so accuracy tracks the ODE
// tolerance instead of an interpolation mesh. Zero outside (x0, x1).
class StagePotential {
 public:
  StagePotential() = default;
  StagePotential(const Stage& stage, const FloquetData* fd,
                 std::vector<double> anchor_x, std::vector<double> anchor_sigma,
                 double ode_tol);

  double operator()(double x) const;
  // One forward sweep for ascending xs (amortizes the re-integration).
  std::vector<double> eval_sorted(const std::vector<double>& xs) const;

  double x0() const { return x0_; }
  double x1() const { return x1_; }
  double coupling() const { return c_; }
  double offset() const { return b_; }

 private:
  double sigma_at(double x, double anchor_x, double anchor_sigma) const;

  const FloquetData* fd_ = nullptr;
  std::vector<double> ax_, asigma_;
  double x0_ = 0, x1_ = 0, b_ = 0, c_ = 0, w_ = 0;
  double ode_tol_ = 1e-11;
};

// Builds the evaluator from a solved trajectory (the trajectory's samples
// double as re-integration anchors).
StagePotential stage_potential(const Stage& stage, const FloquetData& fd,
                               const StageTrajectory& traj,
                               double ode_tol = 1e-11);

struct StageCheck {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double bound = 0.0;
  std::string detail;
};

struct StageReport {
  double slope = 0.0;            // fitted lnR vs ln((1+x-b)/(1+x0-b))
  double slope_bound = 0.0;      // -D (1 - slack)
  double max_protected_ratio = 0.0;
  std::vector<StageCheck> checks;
  bool all_pass = true;
};

// Runs the stage and its probe batch: target decay slope and monotonicity,
// max R(x,Ehat)/R(x0,Ehat) over protected energies x probe boundary angles
// (bound 2 always; 1.5 once x0-b exceeds opt.k_min), plus oscillation
// diagnostics for the target and each protected pairing. Probe integrations
// are independent and run in parallel when opt.parallel is set.
StageReport check_stage_contract(const Stage& stage, const FloquetData& fd,
                                 const std::vector<FloquetData>& fd_protected,
                                 double decay_exponent,
                                 const StageOptions& opt = {});

struct OscillationReport {
  double sup_target = 0.0;       // sup over x of |int cos(4 theta)/(1+y-b)|
  double sup_target_half = 0.0;  // same, limited to the first half-range
  double sup_cross = 0.0;        // sup |int sin2theta sin2theta_hat/(2 gamma_hat' (1+y-b))|
  double sup_cross_half = 0.0;
  bool has_cross = false;
};

// Re-integrates the stage flow with quadrature co-states; sups are tracked
// at every accepted step. half_point <= 0 places the half-range checkpoint at
// the geometric midpoint of (1+x-b).
OscillationReport oscillation_diagnostic(const Stage& stage,
                                         const FloquetData& fd,
                                         const FloquetData* fd_other,
                                         double half_point = 0.0,
                                         const StageOptions& opt = {});

// Smallest x0-b from `candidates` whose protected-stability probe batch stays
// within ratio 1.5; throws if none qualifies.
double calibrate_stage_threshold(const Stage& prototype, const FloquetData& fd,
                                 const std::vector<FloquetData>& fd_protected,
                                 const std::vector<double>& candidates,
                                 const StageOptions& opt = {});

}  // namespace emband
