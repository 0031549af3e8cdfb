#pragma once

// Experiment harness: the library's headline guarantees packaged as
// runnable, self-checking experiments. Each experiment measures a set of
// inequalities (lhs <= rhs with explicit margins and worst-case locations)
// and folds them into one pass flag; reports serialize to JSON for the CLI
// and the acceptance suite. Probe batches run in parallel; outputs do not
// depend on the thread count.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "emband/assemble.hpp"
#include "emband/jacobi_construct.hpp"

namespace emband {

class VerifyError : public std::runtime_error {
 public:
  explicit VerifyError(const std::string& what) : std::runtime_error(what) {}
};

// One measured inequality, asserted as lhs <= rhs.
struct IneqRecord {
  std::string name;    // stable descriptive identifier
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // rhs - lhs
  double where = 0.0;   // coordinate (x, site, or index) of the worst case
  bool pass = false;
};

struct ExperimentReport {
  std::string id;
  // Input echo in insertion order; values preformatted for determinism.
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<IneqRecord> checks;
  bool pass = false;
  double runtime_seconds = 0.0;
};

// JSON rendering with insertion-ordered keys and round-trip doubles. Two
// reports with equal contents render byte-identically (runtime included,
// so zero it before diffing runs).
std::string report_json(const ExperimentReport& rep);

// ---- Quasimomentum resonance guard -----------------------------------

struct QuasimomentumRow {
  double e = 0.0;
  double k = 0.0;
};

struct GuardTable {
  std::vector<QuasimomentumRow> rows;  // input order
  // All quasimomenta strictly on one side of pi/2: the pair-sum condition
  // holds automatically for such sets.
  bool half_band = false;
  // Smallest measured distance to a rejected configuration: pairwise
  // |k_i - k_j|, pairwise |k_i + k_j - pi|, and (for stage targets)
  // |k_i - pi/2|. pi when no comparison applies.
  double min_separation = 0.0;
};

// Computes k(E) for every eigenvalue and rejects resonant sets: equal
// quasimomenta, pairs summing to pi within tol, and (when stage_targets)
// any single k within tol of pi/2. Throws VerifyError("resonant set: ...")
// listing the offending pairs; energies outside band interiors propagate
// the band-structure errors.
GuardTable resonance_guard(const PeriodicPotential& v0,
                           const std::vector<double>& eigs, double tol = 1e-6,
                           bool stage_targets = true);
GuardTable resonance_guard(const PeriodicJacobi& j0,
                           const std::vector<double>& eigs, double tol = 1e-6,
                           bool stage_targets = true);

// ---- No-embedding converse -------------------------------------------

struct NoEmbedDemoOptions {
  double x_start = 100.0;  // amplitude floor anchored here
  int probe_angles = 8;    // equispaced boundary angles in [0, pi)
  double slack = 0.5;      // allowed dip below the -(1/3) ln(x/x0) floor
  double gate = 1.0 / 3.0;  // admissibility ceiling for the scaled envelope
  double ode_tol = 1e-10;
  double envelope_samples_per_unit = 2.0;  // continuum gate sampling
  bool parallel = true;
};

// Integrates the perturbed phase/amplitude flow at energy e for a batch of
// boundary angles and asserts the amplitude floor
//   ln R(x) >= ln R(x0) - (1/3) ln(x/x0) - slack
// up to the horizon. Precondition (throws VerifyError when violated): the
// scaled envelope sup |V(x)|(1+x) / (2 min gamma') stays under `gate`
// (lattice: sup |b'(n)| n max|phi|^2 / omega). A solution decaying faster
// than x^{-1/3} at this energy is therefore impossible on the horizon.
ExperimentReport no_embedding_demo(const PeriodicPotential& v0,
                                   const std::function<double(double)>& v,
                                   double e, double horizon,
                                   const NoEmbedDemoOptions& opt = {});
ExperimentReport no_embedding_demo(
    const PeriodicJacobi& j0,
    const std::function<double(std::int64_t)>& b_prime, double e,
    std::int64_t horizon, const NoEmbedDemoOptions& opt = {});

// ---- Embedding pipelines ---------------------------------------------

struct EmbeddingDemoOptions {
  double guard_tol = 1e-6;
  double envelope_norm_bound = 100.0;  // sup|V|(1+x) / (N(w) C_w^2) ceiling
  double l2_ratio_bound = 0.5;
  AssembleOptions assemble;       // continuum backend knobs
  JacobiAssembleOptions lattice;  // lattice backend knobs
};

// Full finite-mode pipeline: resonance guard -> schedule -> assembly ->
// square-summability audit. Asserts the guard separation, every epoch
// contract (decay factors once a target is activated, growth caps before),
// the O(1/x) envelope in normalized form, and geometric decay of each
// target's per-epoch squared-amplitude contribution. Contract failures
// inside the assembly throw; resonant inputs throw before anything runs.
ExperimentReport embedding_demo_finite(const PeriodicPotential& v0,
                                       const std::vector<double>& eigs,
                                       const std::vector<double>& angles,
                                       const SchedulePolicy& policy,
                                       const EmbeddingDemoOptions& opt = {});
ExperimentReport embedding_demo_finite(const PeriodicJacobi& j0,
                                       const std::vector<double>& eigs,
                                       const std::vector<double>& angles,
                                       const SchedulePolicy& policy,
                                       const EmbeddingDemoOptions& opt = {});

// Slow-growth prefix: runs policy.epochs epochs of the unbounded-count
// schedule under the envelope h (|V(x)|(1+x) <= h(x) pointwise, h -> inf).
// Asserts the per-epoch h-envelope ratio <= 1 and all epoch contracts for
// targets activated so far. Throws VerifyError("infeasible h: ...") when h
// is flat on a decade ladder or the schedule cannot fit its budget.
ExperimentReport embedding_demo_infinite(const PeriodicPotential& v0,
                                         const std::vector<double>& eigs,
                                         const std::vector<double>& angles,
                                         const std::function<double(double)>& h,
                                         const SchedulePolicy& policy,
                                         const EmbeddingDemoOptions& opt = {});
ExperimentReport embedding_demo_infinite(const PeriodicJacobi& j0,
                                         const std::vector<double>& eigs,
                                         const std::vector<double>& angles,
                                         const std::function<double(double)>& h,
                                         const SchedulePolicy& policy,
                                         const EmbeddingDemoOptions& opt = {});

}  // namespace emband
