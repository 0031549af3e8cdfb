#pragma once

// Epoch bookkeeping for multi-stage assemblies: which eigenvalue gets a
// decay slot when, how long the slots are, and where each epoch ends.
// All lengths are exact 64-bit integers; the defining recurrences
//   T_{w+1} = T_w * C_{w+1},   J_w = J_{w-1} + N(w) * T_w,   J_0 = T_0
// hold exactly so downstream audits can replay them. Epoch 0 is a silent
// prefix (no perturbation on [0, J_0]).

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace emband {

class ScheduleError : public std::runtime_error {
 public:
  explicit ScheduleError(const std::string& what) : std::runtime_error(what) {}
};

enum class GrowthMode {
  finite,    // N(w) = min(w, #eigenvalues): eventually constant
  infinite,  // N(w) = ceil(w / n_every): unbounded with unit increments
};

struct SchedulePolicy {
  int epochs = 4;
  double decay_exponent = 2.0;  // per-stage decay demand D; drive C = 4*D*g_max
  double g_max = 1.0;           // frame bound of the background at the targets
  std::int64_t t0 = 1000;       // epoch-0 block length (also the silent prefix)
  std::int64_t addliu_base = 2;  // scaled coupling floor C_w >= base^{N(w+1)}
  std::int64_t gtk_base = 4;     // scaled length floor   T_w >= base^w
  double gapr_factor = 2.0;  // scaled envelope budget C^2 N(w) <= factor*min h
  double p = 2.0;        // epoch contract 2^{N(w)} N(w-1)^p C_w^{-p'}
  double p_prime = 2.0;  // finite mode; the infinite builder relaxes this to 1
  int n_every = 2;       // infinite mode: epochs between count increments
  std::int64_t c_max = 64;  // infinite mode: feasibility search ceiling for C
  // Finite mode: > 0 replaces the 4*D*g_max drive with this value (rounded
  // up to the integer slot-length factor). Lattice frames calibrate the
  // drive from their own rotation scale, not from g_max.
  double coupling_override = 0.0;
};

// One stage slot inside an epoch. Geometry is chosen so x0 - b = J_{w-1}
// for every slot of epoch w: all slots of an epoch share the same start
// distance and hence the same decay ratio.
struct EpochSlot {
  int eig_index = 0;  // 0-based index into Schedule::eigenvalues
  std::int64_t x0 = 0, x1 = 0, b = 0;
};

// One inequality family the builder tracks: the strict form (reported) and
// the scaled substitution. The coupling floor is only enforceable in finite
// mode; under slow length growth it pulls against the envelope budget that
// pins C from above, so there it is recorded without being enforced.
struct ScheduleConstraint {
  std::string name;
  std::string strict_form;
  std::string scaled_form;
  bool strict_holds = false;
  bool scaled_holds = false;
  bool enforced = false;       // the builder throws if enforced fails (scaled)
  double strict_margin = 0.0;  // min over epochs of rhs/lhs (>= 1 iff holds)
  double scaled_margin = 0.0;
};

struct Schedule {
  GrowthMode mode = GrowthMode::finite;
  std::vector<double> eigenvalues;
  std::vector<double> boundary_angles;
  // Indexed by epoch w = 0..W. n[0] = 1 by convention (silent prefix block),
  // c[0] = 1 (unused). j[w] is the epoch end; j[0] = t[0].
  std::vector<std::int64_t> n, c, t, j;
  double stage_coupling = 8.0;  // drive C handed to every stage
  double decay_exponent = 2.0;  // per-stage amplitude order the coupling buys
  double p = 2.0, p_prime = 2.0;
  std::function<double(double)> h;  // infinite mode only
  std::vector<ScheduleConstraint> audits;

  int epochs() const { return static_cast<int>(t.size()) - 1; }
  // Stage geometry of epoch w >= 1 (empty for the silent prefix).
  std::vector<EpochSlot> slots(int w) const;
  // Allowed ratio R(J_w)/R(J_{w-1}) for targets active in epoch w:
  //   2^{N(w)} * N(w-1)^p * C_w^{-p'}.
  double contract_factor(int w) const;
  // Allowed ratio for targets not yet activated: 2^{N(w)}.
  double growth_cap(int w) const;
  // First epoch in which eigenvalue `eig` owns a slot.
  int activation_epoch(int eig) const;
};

// Builds the epoch schedule for the given eigenvalues/boundary angles.
// Infinite mode needs an unbounded increasing envelope h and selects the
// largest constant length factor C whose envelope budget stays affordable;
// throws ScheduleError("infeasible scaling: ...") when none exists.
Schedule build_schedule(const std::vector<double>& eigs,
                        const std::vector<double>& angles, GrowthMode mode,
                        const SchedulePolicy& policy = {},
                        const std::function<double(double)>& h = {});

// Minimum of h over [lo, hi], scanned on a geometric grid in 1+x.
double envelope_min(const std::function<double(double)>& h, double lo,
                    double hi, std::size_t samples = 1025);

}  // namespace emband
