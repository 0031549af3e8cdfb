// Slow-decay diagonal drives on periodic Jacobi backgrounds. One stage
// steers the target frame amplitude down at a power rate with the
// self-feeding drive b'(n) = c sin(2 theta(n-1))/(n-1-v); stages tile the
// same epoch schedules as the continuum builder, with the drive coupling
// calibrated from the frame's own rotation scale. All geometry is exact
// integer-site arithmetic on top of the Z-frame recursion in jacobi.hpp.
#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "emband/assemble.hpp"
#include "emband/jacobi.hpp"
#include "emband/prufer.hpp"
#include "emband/schedule.hpp"
#include "emband/wvn_stage.hpp"

namespace emband {

// One lattice stage. The drive lives on sites n0 < n < n1 and vanishes at
// both ends; v < n0 anchors the decay distance n - v.
struct JacobiStage {
  double e_target = 0.0;
  std::vector<double> protected_energies;
  std::int64_t n0 = 0, n1 = 0, v = 0;
  double theta0 = 0.0;  // target phase theta(n0)
  double c = 8.0;       // drive coupling
};

struct JacobiStageOptions {
  std::int64_t k_min = 1000;  // minimum start distance n0 - v
  double angular_tol = 1e-6;  // quasimomentum separation floor
  double slope_slack_factor = 0.1;
  double epsilon = 0.01;      // growth allowance exponent per stage
  double growth_slack = 1.2;  // multiplicative slack on growth bounds
  int probe_angles = 8;
  bool parallel = true;
};

// Geometry and resonance preconditions; throws JacobiError. The drive's
// second harmonic must clear the target (|k - pi/2| > tol) and every
// protected quasimomentum must clear both |khat - k| and |khat + k - pi|.
void validate_jacobi_stage(const JacobiStage& stage, double k_target,
                           const std::vector<double>& k_protected,
                           const JacobiStageOptions& opt,
                           bool enforce_k_min);

// Smallest coupling that delivers per-stage amplitude order decay_exponent
// on every frame: the per-site shrink is c |phi(n)|^2 sin^2(2 theta)/omega
// at unit distance, so c = 2 D max_j omega_j / min_n |phi_j(n)|^2.
double jacobi_coupling(double decay_exponent,
                       const std::vector<JacobiFloquet>& frames);

// Stage output. b_prime[i] is the drive at site n0+1+i (empty when the
// stage has no interior site); theta[i] and ln_r[i] record the target's
// phase and ln R at site n0+i, normalized to ln R(n0) = 0.
struct JacobiStageResult {
  std::vector<double> b_prime;
  std::vector<double> theta;
  std::vector<double> ln_r;
  StageReport report;
};

// Runs one stage: marches the target, then replays every protected frame
// through the stored drive over a batch of boundary angles. Checks: the
// drive envelope sup |b'(m)| (m-1-v) <= c, the fitted decay slope against
// -c <|phi|^2>/(2 omega) with slack, and sup R/R(n0) for the target and
// the protected batch against ((n1-v)/(n0-v))^epsilon * growth_slack.
JacobiStageResult build_jacobi_stage(
    const JacobiStage& stage, const JacobiFloquet& target_frame,
    const std::vector<JacobiFloquet>& protected_frames,
    const JacobiStageOptions& opt = {});

// A spectator replay: frame + starting phase at n0.
struct JacobiReplayJob {
  const JacobiFloquet* frame = nullptr;
  double theta0 = 0.0;
};

// Marches each job through the stored drive (b_prime[i] at site n0+1+i,
// zero afterwards, ending at site n0 + b_prime.size() + 1) and returns
// sup ln R(n)/R(n0) per job. Jobs are independent; the OpenMP and serial
// paths produce bitwise-identical results.
std::vector<double> jacobi_replay_growth(
    const std::vector<JacobiReplayJob>& jobs,
    const std::vector<double>& b_prime, std::int64_t n0, bool parallel);

// Oscillation audit for the weighted ergodic sums sum f(t) cos(4 theta(t))
// / (t - v) (or the cross version with sin(2 theta_other) sin(2 theta)).
// `rational` flags a low-denominator resonance k/pi = num/den, where block
// cancellation makes the sup settle; otherwise sup_half at the geometric
// midpoint of the distance range shows how much of the sup is already
// banked, and eps_fit estimates the residual logarithmic growth rate.
struct ErgodicReport {
  bool rational = false;
  std::int64_t num = 0, den = 0;
  double sup = 0.0;       // sup over n of |partial sum|
  double sup_half = 0.0;  // same, distances up to sqrt(d0 * dend)
  double d_for_eps = 0.0; // sup of (|partial sum| - eps ln(d/d0)), >= 0
  double eps_fit = 0.0;   // (sup - sup_half) / (ln(dend/d0)/2), >= 0
  double eps = 0.0;
};

// theta[i] is the unwrapped phase at site n0+i; f is sampled periodically
// by absolute site, f[(t mod f.size())]. Pass theta_other (same indexing)
// for the cross product. Empty records return all zeros.
ErgodicReport ergodic_sum_check(const JacobiFloquet& jf,
                                const std::vector<double>& f,
                                const std::vector<double>& theta,
                                std::int64_t n0, std::int64_t v, double eps,
                                const std::vector<double>* theta_other = nullptr);

// build_schedule with the drive coupling calibrated from the frames
// (finite mode; other modes pass the policy through unchanged).
Schedule build_jacobi_schedule(const std::vector<double>& eigs,
                               const std::vector<double>& angles,
                               GrowthMode mode,
                               const std::vector<JacobiFloquet>& frames,
                               const SchedulePolicy& policy = {},
                               const std::function<double(double)>& h = {});

// Per-slot growth allowance exponent in epoch w: 1/(100 N(w)).
double epoch_epsilon(const Schedule& s, int w);

// The assembled diagonal perturbation. Values are reproduced exactly: each
// slot stores the owner's Z state at anchor sites, and a query replays the
// self-feeding drive forward from the nearest anchor, so b'(n) is bitwise
// the value the assembly march applied.
class JacobiPerturbation {
 public:
  struct Slot {
    std::int64_t n0 = 0, n1 = 0, v = 0;
    double c = 0.0;
    std::size_t frame = 0;  // owner index into frames()
    std::vector<std::int64_t> anchor_n;  // ascending, anchor_n[0] = n0
    std::vector<std::complex<double>> anchor_z;
  };

  double operator()(std::int64_t n) const;  // 0 outside every (n0, n1)
  // ns ascending; one forward replay per slot.
  std::vector<double> eval_sorted(const std::vector<std::int64_t>& ns) const;

  std::int64_t silent_end() const { return j0_; }
  std::int64_t support_end() const { return jw_; }
  const std::vector<Slot>& slots() const { return slots_; }
  const std::vector<JacobiFloquet>& frames() const { return frames_; }

  void set_frames(std::vector<JacobiFloquet> frames);
  void add_slot(Slot slot);
  void set_range(std::int64_t j0, std::int64_t jw) { j0_ = j0; jw_ = jw; }

 private:
  struct ReplayCursor {
    std::size_t slot = static_cast<std::size_t>(-1);
    std::int64_t site = 0;
    std::complex<double> z;
  };
  double replay_value(std::int64_t n, ReplayCursor& cur) const;

  std::vector<Slot> slots_;
  std::vector<JacobiFloquet> frames_;
  std::int64_t j0_ = 0, jw_ = 0;
};

// Per-slot amplitude audit: sup R/R(slot start) for every eigenvalue (the
// owner included) against ((n1-v)/(n0-v))^{epoch_epsilon} * growth_slack.
struct JacobiSlotCheck {
  int eig = 0;
  int w = 0;
  int slot = 0;
  int owner = 0;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = true;
};

struct JacobiAssembly {
  Schedule schedule;
  JacobiPerturbation potential;
  std::vector<PruferTrajectory> trajectories;  // per eigenvalue, full range
  std::vector<EpochRecord> epochs;             // indexed 0..W (0 = prefix)
  std::vector<ContractRecord> contract;        // per (epoch >= 1, eigenvalue)
  std::vector<JacobiSlotCheck> slot_checks;
  bool contract_pass = true;
  double envelope_sup = 0.0;    // global sup |b'(n)| (1+n)
  double envelope_h_sup = 0.0;  // global sup |b'(n)| (1+n)/h(n)
};

struct JacobiAssembleOptions {
  std::size_t samples_per_slot = 129;
  double angular_tol = 1e-6;
  bool throw_on_contract = true;  // throw JacobiError("epoch contract failed")
  double contract_slack = 1e-9;   // multiplicative slack on the bounds
  double growth_slack = 1.2;      // slack on the per-slot sup bounds
};

// Runs the whole lattice construction for one schedule: boundary states at
// site 1 from u(0) = cos, u(1) = sin of the boundary angle, a silent
// prefix through J_0, then every epoch slot in order, all eigenvalues
// marched together through the shared drive. Frames are copied into the
// returned potential, so the result is self-contained.
JacobiAssembly assemble_jacobi(const Schedule& s,
                               const std::vector<JacobiFloquet>& frames,
                               const JacobiAssembleOptions& opt = {});

struct JacobiNoEmbedOptions {
  std::int64_t n_start = 100;
  int probe_angles = 8;
  double slack = 0.5;      // additive ln R allowance below the floor
  double gate = 1.0 / 3;   // admissibility: sup |b'(n)| n max|phi|^2 <= gate omega
  bool parallel = true;
};

struct JacobiNoEmbedReport {
  double drive_sup = 0.0;  // sup |b'(n)| n max|phi|^2 / omega
  bool admissible = false;
  double min_excess = 0.0;  // min of ln R(n) + (1/3) ln(n/n_start)
  std::int64_t min_excess_site = 0;
  std::vector<double> excess_per_angle;
  std::vector<std::int64_t> site_per_angle;  // where each angle bottoms out
  bool pass = false;
};

// Converse bound: under an admissible drive no solution of the perturbed
// equation can decay faster than (n/n_start)^{-1/3} - every probe angle's
// amplitude stays above that floor (within `slack`). Angles are marched
// independently; OpenMP and serial paths agree bitwise.
JacobiNoEmbedReport no_embed_jacobi(
    const JacobiFloquet& jf,
    const std::function<double(std::int64_t)>& b_prime, std::int64_t horizon,
    const JacobiNoEmbedOptions& opt = {});

}  // namespace emband
