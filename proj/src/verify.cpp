#include "emband/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace emband {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_list(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += fmt(xs[i]);
  }
  return out;
}

IneqRecord leq(std::string name, double lhs, double rhs, double where) {
  IneqRecord r;
  r.name = std::move(name);
  r.lhs = lhs;
  r.rhs = rhs;
  r.margin = rhs - lhs;
  r.where = where;
  r.pass = lhs <= rhs;
  return r;
}

void finish(ExperimentReport& rep, const Timer& tm) {
  rep.pass = !rep.checks.empty();
  for (const auto& c : rep.checks) rep.pass = rep.pass && c.pass;
  rep.runtime_seconds = tm.elapsed();
}

GuardTable guard_core(std::vector<QuasimomentumRow> rows, double tol,
                      bool stage_targets) {
  GuardTable g;
  g.rows = std::move(rows);
  g.min_separation = kPi;
  std::ostringstream bad;
  bool any = false;
  auto offend = [&](const std::string& what) {
    if (any) bad << "; ";
    bad << what;
    any = true;
  };
  for (std::size_t i = 0; i < g.rows.size(); ++i) {
    for (std::size_t j = i + 1; j < g.rows.size(); ++j) {
      const double de = std::abs(g.rows[i].k - g.rows[j].k);
      const double ds = std::abs(g.rows[i].k + g.rows[j].k - kPi);
      g.min_separation = std::min({g.min_separation, de, ds});
      std::ostringstream pair;
      pair << "k(" << g.rows[i].e << ")=" << g.rows[i].k << " and k("
           << g.rows[j].e << ")=" << g.rows[j].k;
      if (de <= tol) offend(pair.str() + " coincide");
      if (ds <= tol) offend(pair.str() + " sum to pi");
    }
    if (stage_targets) {
      const double dh = std::abs(g.rows[i].k - kPi / 2);
      g.min_separation = std::min(g.min_separation, dh);
      if (dh <= tol) {
        std::ostringstream one;
        one << "k(" << g.rows[i].e << ")=" << g.rows[i].k << " sits at pi/2";
        offend(one.str());
      }
    }
  }
  if (any) throw VerifyError("resonant set: " + bad.str());
  bool low = true, high = true;
  for (const auto& r : g.rows) {
    low = low && r.k <= kPi / 2 - tol;
    high = high && r.k >= kPi / 2 + tol;
  }
  g.half_band = !g.rows.empty() && (low || high);
  return g;
}

void check_h_grows(const std::function<double(double)>& h, std::int64_t t0) {
  if (!h) throw VerifyError("infeasible h: no envelope supplied");
  double x = std::max(2.0, static_cast<double>(t0));
  double prev = h(x);
  if (!(prev > 0))
    throw VerifyError("infeasible h: envelope must be positive at x = " +
                      fmt(x));
  for (int j = 0; j < 3; ++j) {
    x *= 10.0;
    const double cur = h(x);
    if (!(cur > prev))
      throw VerifyError(
          "infeasible h: envelope must grow unboundedly (flat near x = " +
          fmt(x) + ")");
    prev = cur;
  }
}

Schedule build_or_infeasible(const std::vector<double>& eigs,
                             const std::vector<double>& angles,
                             const SchedulePolicy& policy,
                             const std::function<double(double)>& h) {
  try {
    return build_schedule(eigs, angles, GrowthMode::infinite, policy, h);
  } catch (const ScheduleError& ex) {
    const std::string what = ex.what();
    if (what.find("infeasible") != std::string::npos)
      throw VerifyError("infeasible h: " + what);
    throw;
  }
}

Schedule build_jacobi_or_infeasible(const std::vector<double>& eigs,
                                    const std::vector<double>& angles,
                                    const std::vector<JacobiFloquet>& frames,
                                    const SchedulePolicy& policy,
                                    const std::function<double(double)>& h) {
  try {
    return build_jacobi_schedule(eigs, angles, GrowthMode::infinite, frames,
                                 policy, h);
  } catch (const ScheduleError& ex) {
    const std::string what = ex.what();
    if (what.find("infeasible") != std::string::npos)
      throw VerifyError("infeasible h: " + what);
    throw;
  }
}

void echo_schedule(ExperimentReport& rep, const Schedule& s,
                   const SchedulePolicy& policy) {
  rep.inputs.emplace_back("eigenvalues", fmt_list(s.eigenvalues));
  rep.inputs.emplace_back("boundary_angles", fmt_list(s.boundary_angles));
  rep.inputs.emplace_back("epochs", std::to_string(policy.epochs));
  rep.inputs.emplace_back("t0", std::to_string(policy.t0));
  rep.inputs.emplace_back("stage_coupling", fmt(s.stage_coupling));
  rep.inputs.emplace_back("support_end", std::to_string(s.j.back()));
}

void contract_records(ExperimentReport& rep, const Schedule& s,
                      const std::vector<ContractRecord>& rows, double slack) {
  for (const auto& c : rows) {
    const std::string name =
        (c.activated ? std::string("epoch-contract-e")
                     : std::string("growth-cap-e")) +
        std::to_string(c.eig) + "-w" + std::to_string(c.w);
    rep.checks.push_back(
        leq(name, c.measured, c.bound * (1 + slack),
            static_cast<double>(s.j[static_cast<std::size_t>(c.w)])));
  }
}

void envelope_record(ExperimentReport& rep,
                     const std::vector<EpochRecord>& epochs, double bound) {
  double worst = 0.0;
  double at = 0.0;
  for (const auto& ep : epochs)
    if (ep.envelope_norm > worst) {
      worst = ep.envelope_norm;
      at = static_cast<double>(ep.w);
    }
  rep.checks.push_back(leq("drive-envelope", worst, bound, at));
}

void l2_records(ExperimentReport& rep, const Schedule& s,
                const L2Report& l2) {
  for (const auto& t : l2.tails) {
    if (!t.asserted) continue;
    rep.checks.push_back(
        leq("l2-tail-e" + std::to_string(t.eig) + "-w" + std::to_string(t.w),
            t.ratio, l2.ratio_bound,
            static_cast<double>(s.j[static_cast<std::size_t>(t.w)])));
  }
}

}  // namespace

std::string report_json(const ExperimentReport& rep) {
  nlohmann::ordered_json j;
  j["experiment"] = rep.id;
  auto in = nlohmann::ordered_json::object();
  for (const auto& [key, value] : rep.inputs) in[key] = value;
  j["inputs"] = in;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : rep.checks)
    arr.push_back(nlohmann::ordered_json{{"name", c.name},
                                         {"lhs", c.lhs},
                                         {"rhs", c.rhs},
                                         {"margin", c.margin},
                                         {"where", c.where},
                                         {"pass", c.pass}});
  j["checks"] = arr;
  j["pass"] = rep.pass;
  j["runtime_seconds"] = rep.runtime_seconds;
  return j.dump(2) + "\n";
}

GuardTable resonance_guard(const PeriodicPotential& v0,
                           const std::vector<double>& eigs, double tol,
                           bool stage_targets) {
  if (eigs.empty()) throw VerifyError("empty target set");
  std::vector<QuasimomentumRow> rows;
  rows.reserve(eigs.size());
  for (double e : eigs) rows.push_back({e, quasimomentum(v0, e)});
  return guard_core(std::move(rows), tol, stage_targets);
}

GuardTable resonance_guard(const PeriodicJacobi& j0,
                           const std::vector<double>& eigs, double tol,
                           bool stage_targets) {
  if (eigs.empty()) throw VerifyError("empty target set");
  std::vector<QuasimomentumRow> rows;
  rows.reserve(eigs.size());
  for (double e : eigs) rows.push_back({e, jacobi_floquet(j0, e).k});
  return guard_core(std::move(rows), tol, stage_targets);
}

ExperimentReport no_embedding_demo(const PeriodicPotential& v0,
                                   const std::function<double(double)>& v,
                                   double e, double horizon,
                                   const NoEmbedDemoOptions& opt) {
  Timer tm;
  if (!(opt.x_start > 0) || !(horizon > opt.x_start))
    throw VerifyError("no-embed demo needs 0 < x_start < horizon");
  if (opt.probe_angles < 1)
    throw VerifyError("no-embed demo needs at least one probe angle");
  if (!v) throw VerifyError("no-embed demo needs a perturbation");

  const FloquetData fd = floquet_solution(v0, e);
  const double x0 = opt.x_start;

  // Envelope gate on a deterministic uniform grid.
  const double step = 1.0 / std::max(opt.envelope_samples_per_unit, 1e-3);
  const auto n_samp =
      static_cast<std::size_t>(std::ceil((horizon - x0) / step)) + 1;
  double env = 0.0, env_at = x0;
  for (std::size_t i = 0; i < n_samp; ++i) {
    const double x = std::min(x0 + static_cast<double>(i) * step, horizon);
    const double val = std::abs(v(x)) * (1.0 + x);
    if (val > env) {
      env = val;
      env_at = x;
    }
  }
  const double drive_sup = env / (2.0 * fd.min_gamma_prime());
  const double gate = opt.gate * (1 + 1e-9);
  if (drive_sup > gate) {
    std::ostringstream err;
    err << "perturbation envelope too large for the no-embed gate: scaled sup "
        << drive_sup << " > " << opt.gate << " near x = " << env_at;
    throw VerifyError(err.str());
  }

  const auto n_angles = static_cast<std::size_t>(opt.probe_angles);
  std::vector<double> excess(n_angles, 0.0), excess_at(n_angles, x0);
#pragma omp parallel for schedule(static) if (opt.parallel)
  for (int a = 0; a < opt.probe_angles; ++a) {
    const double psi0 = kPi * a / opt.probe_angles;
    PruferOptions po;
    po.ode_tol = opt.ode_tol;
    const PruferTrajectory traj =
        integrate_prufer(fd, v, x0, horizon, psi0, po);
    double mn = 0.0, mn_at = x0;
    for (std::size_t i = 1; i < traj.grid.size(); ++i) {
      const double ex =
          traj.ln_r[i] + std::log(traj.grid[i] / x0) / 3.0;
      if (ex < mn) {
        mn = ex;
        mn_at = traj.grid[i];
      }
    }
    excess[static_cast<std::size_t>(a)] = mn;
    excess_at[static_cast<std::size_t>(a)] = mn_at;
  }
  std::size_t worst = 0;
  for (std::size_t a = 1; a < n_angles; ++a)
    if (excess[a] < excess[worst]) worst = a;

  ExperimentReport rep;
  rep.id = "no-embedding";
  rep.inputs.emplace_back("operator", "continuous");
  rep.inputs.emplace_back("energy", fmt(e));
  rep.inputs.emplace_back("quasimomentum", fmt(fd.k));
  rep.inputs.emplace_back("x_start", fmt(x0));
  rep.inputs.emplace_back("horizon", fmt(horizon));
  rep.inputs.emplace_back("probe_angles", std::to_string(opt.probe_angles));
  rep.inputs.emplace_back("envelope_sup", fmt(env));
  rep.checks.push_back(leq("drive-admissible", drive_sup, gate, env_at));
  rep.checks.push_back(
      leq("amplitude-floor", -excess[worst], opt.slack, excess_at[worst]));
  finish(rep, tm);
  return rep;
}

ExperimentReport no_embedding_demo(
    const PeriodicJacobi& j0,
    const std::function<double(std::int64_t)>& b_prime, double e,
    std::int64_t horizon, const NoEmbedDemoOptions& opt) {
  Timer tm;
  if (!b_prime) throw VerifyError("no-embed demo needs a perturbation");
  const JacobiFloquet jf = jacobi_floquet(j0, e);
  JacobiNoEmbedOptions jopt;
  jopt.n_start = std::llround(opt.x_start);
  jopt.probe_angles = opt.probe_angles;
  jopt.slack = opt.slack;
  jopt.gate = opt.gate;
  jopt.parallel = opt.parallel;
  JacobiNoEmbedReport base;
  try {
    base = no_embed_jacobi(jf, b_prime, horizon, jopt);
  } catch (const JacobiError& ex) {
    throw VerifyError(ex.what());
  }
  if (!base.admissible) {
    std::ostringstream err;
    err << "perturbation envelope too large for the no-embed gate: scaled sup "
        << base.drive_sup << " > " << opt.gate;
    throw VerifyError(err.str());
  }

  ExperimentReport rep;
  rep.id = "no-embedding";
  rep.inputs.emplace_back("operator", "jacobi");
  rep.inputs.emplace_back("energy", fmt(e));
  rep.inputs.emplace_back("quasimomentum", fmt(jf.k));
  rep.inputs.emplace_back("n_start", std::to_string(jopt.n_start));
  rep.inputs.emplace_back("horizon", std::to_string(horizon));
  rep.inputs.emplace_back("probe_angles", std::to_string(opt.probe_angles));
  rep.checks.push_back(leq("drive-admissible", base.drive_sup,
                           opt.gate * (1 + 1e-9),
                           static_cast<double>(jopt.n_start)));
  rep.checks.push_back(leq("amplitude-floor", -base.min_excess, opt.slack,
                           static_cast<double>(base.min_excess_site)));
  finish(rep, tm);
  return rep;
}

ExperimentReport embedding_demo_finite(const PeriodicPotential& v0,
                                       const std::vector<double>& eigs,
                                       const std::vector<double>& angles,
                                       const SchedulePolicy& policy,
                                       const EmbeddingDemoOptions& opt) {
  Timer tm;
  const GuardTable guard = resonance_guard(v0, eigs, opt.guard_tol, true);
  std::vector<FloquetData> fds;
  fds.reserve(eigs.size());
  for (double e : eigs) fds.push_back(floquet_solution(v0, e));
  const Schedule s = build_schedule(eigs, angles, GrowthMode::finite, policy);
  const Assembly a = assemble(s, fds, opt.assemble);
  const L2Report l2 = verify_l2(a, opt.l2_ratio_bound);

  ExperimentReport rep;
  rep.id = "embedding-finite";
  rep.inputs.emplace_back("operator", "continuous");
  rep.inputs.emplace_back("mode", "finite");
  echo_schedule(rep, s, policy);
  rep.inputs.emplace_back("envelope_sup", fmt(a.envelope_sup));
  rep.checks.push_back(
      leq("resonance-separation", opt.guard_tol, guard.min_separation, 0.0));
  contract_records(rep, s, a.contract, opt.assemble.contract_slack);
  envelope_record(rep, a.epochs, opt.envelope_norm_bound);
  l2_records(rep, s, l2);
  finish(rep, tm);
  return rep;
}

ExperimentReport embedding_demo_finite(const PeriodicJacobi& j0,
                                       const std::vector<double>& eigs,
                                       const std::vector<double>& angles,
                                       const SchedulePolicy& policy,
                                       const EmbeddingDemoOptions& opt) {
  Timer tm;
  const GuardTable guard = resonance_guard(j0, eigs, opt.guard_tol, true);
  std::vector<JacobiFloquet> frames;
  frames.reserve(eigs.size());
  for (double e : eigs) frames.push_back(jacobi_floquet(j0, e));
  const Schedule s =
      build_jacobi_schedule(eigs, angles, GrowthMode::finite, frames, policy);
  const JacobiAssembly a = assemble_jacobi(s, frames, opt.lattice);
  const L2Report l2 = verify_l2(s, a.epochs, opt.l2_ratio_bound);

  ExperimentReport rep;
  rep.id = "embedding-finite";
  rep.inputs.emplace_back("operator", "jacobi");
  rep.inputs.emplace_back("mode", "finite");
  echo_schedule(rep, s, policy);
  rep.inputs.emplace_back("envelope_sup", fmt(a.envelope_sup));
  rep.checks.push_back(
      leq("resonance-separation", opt.guard_tol, guard.min_separation, 0.0));
  contract_records(rep, s, a.contract, opt.lattice.contract_slack);
  envelope_record(rep, a.epochs, opt.envelope_norm_bound);
  for (const auto& sc : a.slot_checks)
    rep.checks.push_back(leq("slot-growth-e" + std::to_string(sc.eig) + "-w" +
                                 std::to_string(sc.w) + "s" +
                                 std::to_string(sc.slot),
                             sc.measured, sc.bound,
                             static_cast<double>(sc.slot)));
  l2_records(rep, s, l2);
  finish(rep, tm);
  return rep;
}

ExperimentReport embedding_demo_infinite(
    const PeriodicPotential& v0, const std::vector<double>& eigs,
    const std::vector<double>& angles, const std::function<double(double)>& h,
    const SchedulePolicy& policy, const EmbeddingDemoOptions& opt) {
  Timer tm;
  check_h_grows(h, policy.t0);
  const GuardTable guard = resonance_guard(v0, eigs, opt.guard_tol, true);
  std::vector<FloquetData> fds;
  fds.reserve(eigs.size());
  for (double e : eigs) fds.push_back(floquet_solution(v0, e));
  const Schedule s = build_or_infeasible(eigs, angles, policy, h);
  const Assembly a = assemble(s, fds, opt.assemble);

  ExperimentReport rep;
  rep.id = "embedding-infinite";
  rep.inputs.emplace_back("operator", "continuous");
  rep.inputs.emplace_back("mode", "infinite");
  echo_schedule(rep, s, policy);
  rep.checks.push_back(
      leq("resonance-separation", opt.guard_tol, guard.min_separation, 0.0));
  for (const auto& ep : a.epochs) {
    if (ep.w == 0) continue;
    rep.checks.push_back(
        leq("h-envelope-w" + std::to_string(ep.w), ep.envelope_h_sup, 1.0,
            static_cast<double>(ep.x_end)));
  }
  contract_records(rep, s, a.contract, opt.assemble.contract_slack);
  finish(rep, tm);
  return rep;
}

ExperimentReport embedding_demo_infinite(
    const PeriodicJacobi& j0, const std::vector<double>& eigs,
    const std::vector<double>& angles, const std::function<double(double)>& h,
    const SchedulePolicy& policy, const EmbeddingDemoOptions& opt) {
  Timer tm;
  check_h_grows(h, policy.t0);
  const GuardTable guard = resonance_guard(j0, eigs, opt.guard_tol, true);
  std::vector<JacobiFloquet> frames;
  frames.reserve(eigs.size());
  for (double e : eigs) frames.push_back(jacobi_floquet(j0, e));
  const Schedule s =
      build_jacobi_or_infeasible(eigs, angles, frames, policy, h);
  const JacobiAssembly a = assemble_jacobi(s, frames, opt.lattice);

  ExperimentReport rep;
  rep.id = "embedding-infinite";
  rep.inputs.emplace_back("operator", "jacobi");
  rep.inputs.emplace_back("mode", "infinite");
  echo_schedule(rep, s, policy);
  rep.checks.push_back(
      leq("resonance-separation", opt.guard_tol, guard.min_separation, 0.0));
  for (const auto& ep : a.epochs) {
    if (ep.w == 0) continue;
    rep.checks.push_back(
        leq("h-envelope-w" + std::to_string(ep.w), ep.envelope_h_sup, 1.0,
            static_cast<double>(ep.x_end)));
  }
  contract_records(rep, s, a.contract, opt.lattice.contract_slack);
  finish(rep, tm);
  return rep;
}

}  // namespace emband
