#include "emband/jacobi_construct.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace emband {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Site grid between n0 and n1, geometric in the distance n - v. Always
// contains both endpoints; short slots are returned densely.
std::vector<std::int64_t> slot_sites(std::int64_t n0, std::int64_t n1,
                                     std::int64_t v, std::size_t count) {
  std::vector<std::int64_t> out;
  if (n1 <= n0) return out;
  count = std::max<std::size_t>(count, 2);
  if (static_cast<std::int64_t>(count) >= n1 - n0 + 1) {
    out.reserve(static_cast<std::size_t>(n1 - n0 + 1));
    for (std::int64_t n = n0; n <= n1; ++n) out.push_back(n);
    return out;
  }
  const double d0 = static_cast<double>(n0 - v);
  const double d1 = static_cast<double>(n1 - v);
  out.reserve(count);
  out.push_back(n0);
  for (std::size_t i = 1; i + 1 < count; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(count - 1);
    std::int64_t n = v + std::llround(d0 * std::pow(d1 / d0, f));
    n = std::clamp(n, n0, n1);
    if (n > out.back()) out.push_back(n);
  }
  if (n1 > out.back()) out.push_back(n1);
  return out;
}

}  // namespace

void validate_jacobi_stage(const JacobiStage& stage, double k_target,
                           const std::vector<double>& k_protected,
                           const JacobiStageOptions& opt,
                           bool enforce_k_min) {
  if (!(stage.v < stage.n0 && stage.n0 < stage.n1))
    throw JacobiError("stage geometry needs v < n0 < n1");
  if (enforce_k_min && stage.n0 - stage.v < opt.k_min)
    throw JacobiError("start distance " + std::to_string(stage.n0 - stage.v) +
                      " is below the minimum " + std::to_string(opt.k_min));
  if (!(stage.c >= 0))
    throw JacobiError("stage coupling must be nonnegative");
  std::ostringstream err;
  if (std::abs(k_target - 0.5 * kPi) <= opt.angular_tol) {
    err << "target quasimomentum " << k_target
        << " is resonant with the drive's second harmonic";
    throw JacobiError(err.str());
  }
  for (double kh : k_protected) {
    if (std::abs(kh - k_target) <= opt.angular_tol ||
        std::abs(kh + k_target - kPi) <= opt.angular_tol) {
      err << "protected quasimomentum " << kh
          << " is resonant with the target " << k_target;
      throw JacobiError(err.str());
    }
  }
}

double jacobi_coupling(double decay_exponent,
                       const std::vector<JacobiFloquet>& frames) {
  if (frames.empty())
    throw JacobiError("coupling calibration needs at least one frame");
  double scale = 0.0;
  for (const auto& f : frames)
    scale = std::max(scale, f.omega / f.min_abs2());
  return 2.0 * decay_exponent * scale;
}

JacobiStageResult build_jacobi_stage(
    const JacobiStage& stage, const JacobiFloquet& target_frame,
    const std::vector<JacobiFloquet>& protected_frames,
    const JacobiStageOptions& opt) {
  if (std::abs(stage.e_target - target_frame.e) > 1e-9)
    throw JacobiError("target frame energy mismatch");
  if (protected_frames.size() != stage.protected_energies.size())
    throw JacobiError("one protected frame per protected energy");
  for (std::size_t i = 0; i < protected_frames.size(); ++i)
    if (std::abs(protected_frames[i].e - stage.protected_energies[i]) > 1e-9)
      throw JacobiError("protected frame energy mismatch at index " +
                        std::to_string(i));
  std::vector<double> k_protected;
  k_protected.reserve(protected_frames.size());
  for (const auto& f : protected_frames) k_protected.push_back(f.k);
  validate_jacobi_stage(stage, target_frame.k, k_protected, opt, true);

  const std::int64_t n0 = stage.n0, n1 = stage.n1, v = stage.v;
  const auto len = static_cast<std::size_t>(n1 - n0);

  JacobiStageResult res;
  res.b_prime.reserve(len > 0 ? len - 1 : 0);
  res.theta.reserve(len + 1);
  res.ln_r.reserve(len + 1);

  JacobiPruferState st;
  st.n = n0;
  st.z = std::polar(1.0, stage.theta0 - target_frame.gamma(n0));
  double eta = std::arg(st.z);
  // arg() folds the start into (-pi, pi]; rebase so the record begins at
  // exactly theta0 instead of a 2-pi translate of it.
  const double rebase = stage.theta0 - (eta + target_frame.gamma(n0));
  res.theta.push_back(stage.theta0);
  res.ln_r.push_back(0.0);

  double sup_ln = 0.0;
  double env = 0.0;
  for (std::int64_t n = n0; n < n1; ++n) {
    double bp = 0.0;
    if (n <= n1 - 2) {
      const double th = prufer_theta(st, target_frame);
      bp = stage.c * std::sin(2.0 * th) / static_cast<double>(n - v);
      res.b_prime.push_back(bp);
      env = std::max(env, std::abs(bp) * static_cast<double>(n - v));
    }
    const JacobiPruferState nx = prufer_step(st, bp, target_frame);
    eta += std::arg(nx.z * std::conj(st.z));
    st = nx;
    const double lr = st.ln_r();
    res.ln_r.push_back(lr);
    res.theta.push_back(eta + target_frame.gamma(st.n) + rebase);
    sup_ln = std::max(sup_ln, lr);
  }

  const double dist_ratio =
      static_cast<double>(n1 - v) / static_cast<double>(n0 - v);
  StageReport& rep = res.report;

  StageCheck envc;
  envc.name = "drive-envelope";
  envc.measured = env;
  envc.bound = stage.c * (1 + 1e-12);
  envc.pass = envc.measured <= envc.bound;
  rep.checks.push_back(envc);

  rep.slope = res.ln_r.back() / std::log(dist_ratio);
  rep.slope_bound =
      -(stage.c * target_frame.mean_abs2() / (2.0 * target_frame.omega)) *
      (1.0 - opt.slope_slack_factor);
  StageCheck slope;
  slope.name = "decay-slope";
  slope.measured = rep.slope;
  slope.bound = rep.slope_bound;
  slope.pass = rep.slope <= rep.slope_bound;
  rep.checks.push_back(slope);

  const double growth_bound =
      std::pow(dist_ratio, opt.epsilon) * opt.growth_slack;
  StageCheck tsup;
  tsup.name = "target-sup";
  tsup.measured = std::exp(sup_ln);
  tsup.bound = growth_bound;
  tsup.pass = tsup.measured <= tsup.bound;
  rep.checks.push_back(tsup);

  std::vector<JacobiReplayJob> jobs;
  jobs.reserve(protected_frames.size() *
               static_cast<std::size_t>(opt.probe_angles));
  for (const auto& f : protected_frames)
    for (int a = 0; a < opt.probe_angles; ++a)
      jobs.push_back({&f, kPi * a / opt.probe_angles});
  const auto growth = jacobi_replay_growth(jobs, res.b_prime, n0, opt.parallel);
  double gmax = 0.0;
  for (double g : growth) gmax = std::max(gmax, g);
  StageCheck prot;
  prot.name = "protected-growth";
  prot.measured = std::exp(gmax);
  prot.bound = growth_bound;
  prot.pass = prot.measured <= prot.bound;
  rep.max_protected_ratio = prot.measured;
  rep.checks.push_back(prot);

  rep.all_pass = true;
  for (const auto& c : rep.checks) rep.all_pass = rep.all_pass && c.pass;
  return res;
}

std::vector<double> jacobi_replay_growth(
    const std::vector<JacobiReplayJob>& jobs,
    const std::vector<double>& b_prime, std::int64_t n0, bool parallel) {
  std::vector<double> out(jobs.size(), 0.0);
  const auto n_steps = static_cast<std::int64_t>(b_prime.size()) + 1;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(jobs.size());
       ++i) {
    const JacobiFloquet& fr = *jobs[static_cast<std::size_t>(i)].frame;
    JacobiPruferState st;
    st.n = n0;
    st.z = std::polar(
        1.0, jobs[static_cast<std::size_t>(i)].theta0 - fr.gamma(n0));
    double sup = 0.0;
    for (std::int64_t sidx = 0; sidx < n_steps; ++sidx) {
      const double bp = sidx < static_cast<std::int64_t>(b_prime.size())
                            ? b_prime[static_cast<std::size_t>(sidx)]
                            : 0.0;
      st = prufer_step(st, bp, fr);
      sup = std::max(sup, st.ln_r());
    }
    out[static_cast<std::size_t>(i)] = sup;
  }
  return out;
}

ErgodicReport ergodic_sum_check(const JacobiFloquet& jf,
                                const std::vector<double>& f,
                                const std::vector<double>& theta,
                                std::int64_t n0, std::int64_t v, double eps,
                                const std::vector<double>* theta_other) {
  ErgodicReport rep;
  rep.eps = eps;

  // Continued-fraction scan of k/pi for a low-denominator resonance. Only
  // small blocks matter at finite range, so the denominator is capped.
  {
    const double x = jf.k / kPi;
    double frac = x - std::floor(x);
    std::int64_t pm1 = 1, qm1 = 0;
    auto pc = static_cast<std::int64_t>(std::floor(x));
    std::int64_t qc = 1;
    for (int it = 0; it < 40 && qc <= 100; ++it) {
      if (std::abs(x - static_cast<double>(pc) / static_cast<double>(qc)) <
          1e-12) {
        rep.rational = true;
        rep.num = pc;
        rep.den = qc;
        break;
      }
      if (frac < 1e-15) break;
      frac = 1.0 / frac;
      const double a = std::floor(frac);
      frac -= a;
      const auto ai = static_cast<std::int64_t>(a);
      const std::int64_t pn = ai * pc + pm1;
      const std::int64_t qn = ai * qc + qm1;
      pm1 = pc;
      qm1 = qc;
      pc = pn;
      qc = qn;
    }
  }

  if (theta.empty()) return rep;
  if (theta_other && theta_other->size() != theta.size())
    throw JacobiError("cross record length mismatch");
  if (f.empty()) throw JacobiError("ergodic check needs a nonempty weight");
  if (!(n0 > v)) throw JacobiError("ergodic check needs n0 > v");

  const auto L = static_cast<std::int64_t>(f.size());
  const double d0 = static_cast<double>(n0 - v);
  const double dend =
      static_cast<double>(n0 + static_cast<std::int64_t>(theta.size()) - 1 - v);
  const double dhalf = std::sqrt(d0 * dend);

  double s = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const std::int64_t t = n0 + static_cast<std::int64_t>(i);
    const double d = static_cast<double>(t - v);
    const double w = f[static_cast<std::size_t>(((t % L) + L) % L)];
    const double g =
        theta_other ? std::sin(2.0 * (*theta_other)[i]) * std::sin(2.0 * theta[i])
                    : std::cos(4.0 * theta[i]);
    s += w * g / d;
    const double as = std::abs(s);
    rep.sup = std::max(rep.sup, as);
    if (d <= dhalf) rep.sup_half = std::max(rep.sup_half, as);
    rep.d_for_eps = std::max(rep.d_for_eps, as - eps * std::log(d / d0));
  }
  if (dend > d0)
    rep.eps_fit =
        std::max(0.0, (rep.sup - rep.sup_half) / (0.5 * std::log(dend / d0)));
  return rep;
}

Schedule build_jacobi_schedule(const std::vector<double>& eigs,
                               const std::vector<double>& angles,
                               GrowthMode mode,
                               const std::vector<JacobiFloquet>& frames,
                               const SchedulePolicy& policy,
                               const std::function<double(double)>& h) {
  SchedulePolicy p = policy;
  if (mode == GrowthMode::finite)
    p.coupling_override = jacobi_coupling(p.decay_exponent, frames);
  return build_schedule(eigs, angles, mode, p, h);
}

double epoch_epsilon(const Schedule& s, int w) {
  return 1.0 /
         (100.0 * static_cast<double>(s.n.at(static_cast<std::size_t>(w))));
}

void JacobiPerturbation::set_frames(std::vector<JacobiFloquet> frames) {
  frames_ = std::move(frames);
}

void JacobiPerturbation::add_slot(Slot slot) {
  if (slot.frame >= frames_.size())
    throw JacobiError("slot frame index out of range");
  if (!(slot.v < slot.n0 && slot.n0 < slot.n1))
    throw JacobiError("slot geometry needs v < n0 < n1");
  if (slot.anchor_n.size() != slot.anchor_z.size() || slot.anchor_n.empty() ||
      slot.anchor_n.front() != slot.n0)
    throw JacobiError("slot anchors must start at n0");
  if (!slots_.empty() && slot.n0 < slots_.back().n1)
    throw JacobiError("slots must be added in disjoint ascending order");
  slots_.push_back(std::move(slot));
}

double JacobiPerturbation::operator()(std::int64_t n) const {
  ReplayCursor cur;
  return replay_value(n, cur);
}

std::vector<double> JacobiPerturbation::eval_sorted(
    const std::vector<std::int64_t>& ns) const {
  std::vector<double> out(ns.size(), 0.0);
  ReplayCursor cur;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (i > 0 && ns[i] < ns[i - 1])
      throw JacobiError("eval_sorted needs ascending sites");
    out[i] = replay_value(ns[i], cur);
  }
  return out;
}

double JacobiPerturbation::replay_value(std::int64_t n,
                                        ReplayCursor& cur) const {
  auto it = std::upper_bound(
      slots_.begin(), slots_.end(), n,
      [](std::int64_t x, const Slot& sl) { return x < sl.n0; });
  if (it == slots_.begin()) return 0.0;
  const auto idx = static_cast<std::size_t>(it - slots_.begin()) - 1;
  const Slot& sl = slots_[idx];
  if (!(n > sl.n0 && n < sl.n1)) return 0.0;
  const JacobiFloquet& fr = frames_[sl.frame];

  if (cur.slot != idx || cur.site > n - 1) {
    auto ait = std::upper_bound(sl.anchor_n.begin(), sl.anchor_n.end(), n - 1);
    const auto a = static_cast<std::size_t>(ait - sl.anchor_n.begin()) - 1;
    cur.slot = idx;
    cur.site = sl.anchor_n[a];
    cur.z = sl.anchor_z[a];
  }
  JacobiPruferState st;
  st.n = cur.site;
  st.z = cur.z;
  while (st.n < n - 1) {
    const double th = prufer_theta(st, fr);
    const double bp =
        sl.c * std::sin(2.0 * th) / static_cast<double>(st.n - sl.v);
    st = prufer_step(st, bp, fr);
  }
  cur.site = st.n;
  cur.z = st.z;
  const double th = prufer_theta(st, fr);
  return sl.c * std::sin(2.0 * th) / static_cast<double>(st.n - sl.v);
}

JacobiAssembly assemble_jacobi(const Schedule& s,
                               const std::vector<JacobiFloquet>& frames,
                               const JacobiAssembleOptions& opt) {
  const std::size_t n_eigs = s.eigenvalues.size();
  if (frames.size() != n_eigs)
    throw JacobiError("assemble needs one Floquet frame per eigenvalue");
  for (std::size_t i = 0; i < n_eigs; ++i)
    if (std::abs(frames[i].e - s.eigenvalues[i]) > 1e-9)
      throw JacobiError("Floquet frame energy mismatch at index " +
                        std::to_string(i));
  for (std::size_t i = 0; i < n_eigs; ++i) {
    if (std::abs(frames[i].k - 0.5 * kPi) <= opt.angular_tol)
      throw JacobiError("target " + std::to_string(i) +
                        " sits at the resonant quasimomentum pi/2");
    for (std::size_t jj = i + 1; jj < n_eigs; ++jj)
      if (std::abs(frames[i].k - frames[jj].k) <= opt.angular_tol ||
          std::abs(frames[i].k + frames[jj].k - kPi) <= opt.angular_tol)
        throw JacobiError("targets " + std::to_string(i) + " and " +
                          std::to_string(jj) + " have resonant quasimomenta");
  }
  // Reject drives too weak for the fastest-rotating target up front, like
  // the continuum assembler does; slow-growth schedules skip this.
  if (s.mode == GrowthMode::finite) {
    for (std::size_t i = 0; i < n_eigs; ++i) {
      const double scale = frames[i].omega / frames[i].min_abs2();
      const double needed = 2.0 * s.decay_exponent * scale;
      if (needed > s.stage_coupling * 1.05) {
        std::ostringstream err;
        err << "target " << i << " rotates at frame scale " << scale
            << ", needing coupling >= " << needed << " (schedule supplies "
            << s.stage_coupling << ")";
        throw JacobiError(err.str());
      }
    }
  }

  JacobiAssembly out;
  out.schedule = s;
  out.potential.set_frames(frames);
  const int W = s.epochs();
  const std::int64_t j0 = s.j[0];
  const double c_drive = s.stage_coupling;

  std::vector<JacobiPruferState> st(n_eigs);
  std::vector<double> eta(n_eigs, 0.0);
  std::vector<double> q(n_eigs, 0.0);
  out.trajectories.resize(n_eigs);
  for (std::size_t i = 0; i < n_eigs; ++i) {
    const double a = s.boundary_angles[i];
    JacobiPruferState z1 =
        z_from_solution(std::sin(a), std::cos(a), 1, frames[i]);
    st[i].n = j0;  // the prefix drive vanishes, so Z is already Z(j0)
    st[i].z = z1.z / std::abs(z1.z);
    eta[i] = std::arg(st[i].z);
    q[i] = static_cast<double>(j0);  // sites 1..j0 at R = 1
    auto& tr = out.trajectories[i];
    tr.energy = s.eigenvalues[i];
    tr.floquet_ref = "jacobi-eig-" + std::to_string(i);
    tr.grid = {1.0, static_cast<double>(j0)};
    tr.ln_r = {0.0, 0.0};
    tr.theta = {eta[i] + frames[i].gamma(1), eta[i] + frames[i].gamma(j0)};
  }

  EpochRecord prefix;
  prefix.w = 0;
  prefix.x_begin = 0;
  prefix.x_end = j0;
  prefix.ln_r.assign(n_eigs, 0.0);
  prefix.q.assign(n_eigs, static_cast<double>(j0));
  out.epochs.push_back(prefix);

  for (int w = 1; w <= W; ++w) {
    EpochRecord rec;
    rec.w = w;
    rec.x_begin = s.j[static_cast<std::size_t>(w) - 1];
    rec.x_end = s.j[static_cast<std::size_t>(w)];
    double env = 0.0, env_h = 0.0;
    const double eps_w = epoch_epsilon(s, w);
    int slot_idx = 0;
    for (const auto& slot : s.slots(w)) {
      const auto owner = static_cast<std::size_t>(slot.eig_index);
      const JacobiFloquet& ofr = frames[owner];
      const std::int64_t n0 = slot.x0, n1 = slot.x1, v = slot.b;

      const auto sites = slot_sites(n0, n1, v, opt.samples_per_slot);
      JacobiPerturbation::Slot ps;
      ps.n0 = n0;
      ps.n1 = n1;
      ps.v = v;
      ps.c = c_drive;
      ps.frame = owner;
      ps.anchor_n.push_back(n0);
      ps.anchor_z.push_back(st[owner].z);

      std::vector<double> norm0(n_eigs), sup_norm(n_eigs);
      for (std::size_t i = 0; i < n_eigs; ++i) {
        norm0[i] = std::norm(st[i].z);
        sup_norm[i] = norm0[i];
        auto& tr = out.trajectories[i];
        if (tr.grid.empty() || tr.grid.back() < static_cast<double>(n0)) {
          tr.grid.push_back(static_cast<double>(n0));
          tr.ln_r.push_back(st[i].ln_r());
          tr.theta.push_back(eta[i] + frames[i].gamma(n0));
        }
      }

      std::size_t next_site = 1;  // sites[0] == n0 is already recorded
      for (std::int64_t n = n0; n < n1; ++n) {
        double bp = 0.0;
        if (n <= n1 - 2) {
          const double th = prufer_theta(st[owner], ofr);
          bp = c_drive * std::sin(2.0 * th) / static_cast<double>(n - v);
        }
        for (std::size_t i = 0; i < n_eigs; ++i) {
          const JacobiPruferState nx = prufer_step(st[i], bp, frames[i]);
          eta[i] += std::arg(nx.z * std::conj(st[i].z));
          st[i] = nx;
          const double nz = std::norm(st[i].z);
          q[i] += nz;
          sup_norm[i] = std::max(sup_norm[i], nz);
        }
        const std::int64_t m = n + 1;
        if (bp != 0.0) {
          const double e1 = std::abs(bp) * static_cast<double>(1 + m);
          env = std::max(env, e1);
          if (s.h) env_h = std::max(env_h, e1 / s.h(static_cast<double>(m)));
        }
        if (next_site < sites.size() && m == sites[next_site]) {
          ++next_site;
          if (m <= n1 - 1) {
            ps.anchor_n.push_back(m);
            ps.anchor_z.push_back(st[owner].z);
          }
          for (std::size_t i = 0; i < n_eigs; ++i) {
            auto& tr = out.trajectories[i];
            tr.grid.push_back(static_cast<double>(m));
            tr.ln_r.push_back(st[i].ln_r());
            tr.theta.push_back(eta[i] + frames[i].gamma(m));
          }
        }
      }

      const double ratio =
          static_cast<double>(n1 - v) / static_cast<double>(n0 - v);
      const double bound = std::pow(ratio, eps_w) * opt.growth_slack;
      for (std::size_t i = 0; i < n_eigs; ++i) {
        JacobiSlotCheck sc;
        sc.eig = static_cast<int>(i);
        sc.w = w;
        sc.slot = slot_idx;
        sc.owner = static_cast<int>(owner);
        sc.measured = std::sqrt(sup_norm[i] / norm0[i]);
        sc.bound = bound;
        sc.pass = sc.measured <= sc.bound;
        out.slot_checks.push_back(sc);
      }
      out.potential.add_slot(std::move(ps));
      ++slot_idx;
    }
    rec.envelope_sup = env;
    const auto cw = static_cast<double>(s.c[static_cast<std::size_t>(w)]);
    const auto nw = static_cast<double>(s.n[static_cast<std::size_t>(w)]);
    rec.envelope_norm = env / (nw * cw * cw);
    rec.envelope_h_sup = env_h;
    rec.ln_r.resize(n_eigs);
    rec.q.resize(n_eigs);
    for (std::size_t i = 0; i < n_eigs; ++i) {
      rec.ln_r[i] = st[i].ln_r();
      rec.q[i] = q[i];
    }
    out.envelope_sup = std::max(out.envelope_sup, env);
    out.envelope_h_sup = std::max(out.envelope_h_sup, env_h);
    out.epochs.push_back(rec);
  }
  out.potential.set_range(j0, s.j[static_cast<std::size_t>(W)]);

  for (int w = 1; w <= W; ++w) {
    for (std::size_t i = 0; i < n_eigs; ++i) {
      ContractRecord c;
      c.eig = static_cast<int>(i);
      c.w = w;
      c.activated =
          s.n[static_cast<std::size_t>(w)] > static_cast<std::int64_t>(i);
      c.measured = std::exp(out.epochs[static_cast<std::size_t>(w)].ln_r[i] -
                            out.epochs[static_cast<std::size_t>(w) - 1].ln_r[i]);
      c.bound = c.activated ? s.contract_factor(w) : s.growth_cap(w);
      c.pass = c.measured <= c.bound * (1 + opt.contract_slack);
      out.contract_pass = out.contract_pass && c.pass;
      out.contract.push_back(c);
    }
  }
  for (const auto& sc : out.slot_checks)
    out.contract_pass = out.contract_pass && sc.pass;

  if (opt.throw_on_contract && !out.contract_pass) {
    std::ostringstream err;
    err << "epoch contract failed:";
    for (const auto& c : out.contract)
      if (!c.pass)
        err << " [eig " << c.eig << " epoch " << c.w << ": " << c.measured
            << " > " << c.bound << "]";
    for (const auto& sc : out.slot_checks)
      if (!sc.pass)
        err << " [eig " << sc.eig << " epoch " << sc.w << " slot " << sc.slot
            << ": " << sc.measured << " > " << sc.bound << "]";
    throw JacobiError(err.str());
  }
  return out;
}

JacobiNoEmbedReport no_embed_jacobi(
    const JacobiFloquet& jf,
    const std::function<double(std::int64_t)>& b_prime, std::int64_t horizon,
    const JacobiNoEmbedOptions& opt) {
  if (!(opt.n_start > 0) || horizon <= opt.n_start)
    throw JacobiError("no-embed check needs 0 < n_start < horizon");
  if (opt.probe_angles < 1)
    throw JacobiError("no-embed check needs at least one probe angle");

  JacobiNoEmbedReport rep;
  const std::int64_t n0 = opt.n_start;
  const auto len = static_cast<std::size_t>(horizon - n0);
  std::vector<double> bp(len);
  double drive = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const std::int64_t m = n0 + 1 + static_cast<std::int64_t>(i);
    bp[i] = b_prime(m);
    drive = std::max(drive, std::abs(bp[i]) * static_cast<double>(m));
  }
  rep.drive_sup = drive * jf.max_abs2() / jf.omega;
  rep.admissible = rep.drive_sup <= opt.gate * (1 + 1e-9);
  rep.excess_per_angle.assign(static_cast<std::size_t>(opt.probe_angles), 0.0);
  rep.site_per_angle.assign(static_cast<std::size_t>(opt.probe_angles), n0);
  if (!rep.admissible) return rep;

#pragma omp parallel for schedule(static) if (opt.parallel)
  for (int a = 0; a < opt.probe_angles; ++a) {
    const double th0 = kPi * a / opt.probe_angles;
    JacobiPruferState st;
    st.n = n0;
    st.z = std::polar(1.0, th0 - jf.gamma(n0));
    double mn = 0.0;
    std::int64_t mn_at = n0;
    for (std::size_t i = 0; i < len; ++i) {
      st = prufer_step(st, bp[i], jf);
      const double floor_gain =
          std::log(static_cast<double>(st.n) / static_cast<double>(n0)) / 3.0;
      const double ex = st.ln_r() + floor_gain;
      if (ex < mn) {
        mn = ex;
        mn_at = st.n;
      }
    }
    rep.excess_per_angle[static_cast<std::size_t>(a)] = mn;
    rep.site_per_angle[static_cast<std::size_t>(a)] = mn_at;
  }
  rep.min_excess = rep.excess_per_angle[0];
  rep.min_excess_site = rep.site_per_angle[0];
  for (std::size_t a = 0; a < rep.excess_per_angle.size(); ++a)
    if (rep.excess_per_angle[a] < rep.min_excess) {
      rep.min_excess = rep.excess_per_angle[a];
      rep.min_excess_site = rep.site_per_angle[a];
    }
  rep.pass = rep.admissible && rep.min_excess >= -opt.slack;
  return rep;
}

}  // namespace emband
