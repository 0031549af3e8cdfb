#include "emband/assemble.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "emband/ode.hpp"

namespace emband {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Geometric grid in 1+x-b over (x0, x1]: the left endpoint is omitted so
// consecutive slots and the prefix never duplicate a sample.
std::vector<double> slot_grid(double x0, double x1, double b, std::size_t n) {
  double d0 = 1 + x0 - b;
  double d1 = 1 + x1 - b;
  std::vector<double> g(n);
  double step = std::log(d1 / d0) / static_cast<double>(n);
  for (std::size_t i = 0; i + 1 < n; ++i)
    g[i] = b - 1 + d0 * std::exp(step * static_cast<double>(i + 1));
  g[n - 1] = x1;
  return g;
}

// Harmonic rotation scale 1 / <1/gamma'> of one frame; uniform sampling of a
// smooth 1-periodic integrand converges spectrally.
double harmonic_scale(const FloquetData& fd) {
  constexpr int kN = 4096;
  double inv = 0.0;
  for (int i = 0; i < kN; ++i)
    inv += 1.0 / fd.gamma_prime((i + 0.5) / kN);
  return kN / inv;
}

}  // namespace

void AssembledPotential::add_stage(const Stage& st, StagePotential pot) {
  stages_.push_back(st);
  pots_.push_back(std::move(pot));
  starts_.push_back(st.x0);
}

double AssembledPotential::operator()(double x) const {
  if (stages_.empty() || x <= j0_ || x >= jw_) return 0.0;
  auto it = std::upper_bound(starts_.begin(), starts_.end(), x);
  if (it == starts_.begin()) return 0.0;
  auto i = static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
  return pots_[i](x);
}

std::vector<double> AssembledPotential::eval_sorted(
    const std::vector<double>& xs) const {
  std::vector<double> out(xs.size(), 0.0);
  std::size_t i = 0;
  for (std::size_t s = 0; s < stages_.size() && i < xs.size(); ++s) {
    while (i < xs.size() && xs[i] <= stages_[s].x0) ++i;  // outside: zero
    std::vector<double> chunk;
    std::size_t first = i;
    while (i < xs.size() && xs[i] < stages_[s].x1) chunk.push_back(xs[i++]);
    if (chunk.empty()) continue;
    auto vals = pots_[s].eval_sorted(chunk);
    for (std::size_t k = 0; k < vals.size(); ++k) out[first + k] = vals[k];
  }
  return out;
}

Assembly assemble(const Schedule& s, const std::vector<FloquetData>& fds,
                  const AssembleOptions& opt) {
  const std::size_t n = s.eigenvalues.size();
  if (fds.size() != n)
    throw StageError("assemble needs one Floquet frame per eigenvalue");
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(fds[i].e - s.eigenvalues[i]) > 1e-9)
      throw StageError("Floquet frame energy mismatch at index " +
                       std::to_string(i));

  // The per-stage amplitude order delivered to target j is
  // stage_coupling / 4 * <1/gamma'_j>, so fast-rotating targets need a
  // proportionally stronger drive. Reject doomed runs up front instead of
  // failing the epoch contract after the full integration. Slow-growth
  // schedules use lenient contract factors and skip this.
  if (s.mode == GrowthMode::finite) {
    for (std::size_t i = 0; i < n; ++i) {
      double scale = harmonic_scale(fds[i]);
      double needed = 4 * s.decay_exponent * scale;
      if (needed > s.stage_coupling * 1.05) {
        std::ostringstream err;
        err << "target " << i << " rotates at harmonic scale " << scale
            << ", needing coupling >= " << needed << " (schedule supplies "
            << s.stage_coupling << ")";
        throw StageError(err.str());
      }
    }
  }

  Assembly out;
  out.schedule = s;
  const int W = s.epochs();
  const double j0 = static_cast<double>(s.j[0]);
  const double c_drive = s.stage_coupling;

  StageOptions vopt;
  vopt.angular_tol = opt.angular_tol;
  vopt.k_min = j0;

  // States: y[j] = sigma_j (phase in its own frame), y[n+j] = ln R_j (global),
  // y[2n+j] = integral of R_j^2 from 0.
  std::vector<double> y(3 * n, 0.0);
  out.trajectories.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    double psi =
        initial_prufer_angle(BoundaryCondition{s.boundary_angles[j], 0.0}, fds[j]);
    y[j] = psi - fds[j].gamma(0.0);
    y[2 * n + j] = j0;  // silent prefix: R = 1 on [0, J_0]
    auto& tr = out.trajectories[j];
    tr.energy = s.eigenvalues[j];
    tr.floquet_ref = "eig-" + std::to_string(j);
    tr.grid = {0.0, j0};
    tr.ln_r = {0.0, 0.0};
    tr.theta = {y[j] + fds[j].gamma(0.0), y[j] + fds[j].gamma(j0)};
  }

  EpochRecord prefix;
  prefix.w = 0;
  prefix.x_begin = 0;
  prefix.x_end = s.j[0];
  prefix.ln_r.assign(n, 0.0);
  prefix.q.assign(n, j0);
  out.epochs.push_back(prefix);

  for (int w = 1; w <= W; ++w) {
    EpochRecord rec;
    rec.w = w;
    rec.x_begin = s.j[w - 1];
    rec.x_end = s.j[w];

    for (const auto& slot : s.slots(w)) {
      const auto t = static_cast<std::size_t>(slot.eig_index);
      Stage stage;
      stage.e_target = s.eigenvalues[t];
      for (std::size_t j = 0; j < n; ++j)
        if (j != t) stage.protected_energies.push_back(s.eigenvalues[j]);
      stage.x0 = static_cast<double>(slot.x0);
      stage.x1 = static_cast<double>(slot.x1);
      stage.b = static_cast<double>(slot.b);
      stage.c = c_drive;
      stage.theta0 = std::fmod(y[t] + fds[t].gamma(stage.x0), kPi);

      std::vector<double> k_protected;
      for (std::size_t j = 0; j < n; ++j)
        if (j != t) k_protected.push_back(fds[j].k);
      validate_stage(stage, fds[t].k, k_protected, vopt, true);

      const double width = stage.width();
      auto rhs = [&, t](double x, const std::vector<double>& yy,
                        std::vector<double>& dy) {
        double d = 1 + x - stage.b;
        double cf = stage_cutoff(x, stage.x0, stage.x1, width);
        double gt = fds[t].gamma_prime(x);
        double tht = yy[t] + fds[t].gamma(x);
        double s2t = std::sin(2 * tht);
        double st = std::sin(tht);
        double a = c_drive * cf / (gt * d);
        dy[t] = a * s2t * st * st;
        dy[n + t] = -0.5 * a * s2t * s2t;
        double v = -c_drive * cf * s2t / d;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == t) continue;
          double gj = fds[j].gamma_prime(x);
          double thj = yy[j] + fds[j].gamma(x);
          double sj = std::sin(thj);
          dy[j] = -(v / gj) * sj * sj;
          dy[n + j] = 0.5 * (v / gj) * std::sin(2 * thj);
        }
        for (std::size_t j = 0; j < n; ++j)
          dy[2 * n + j] = std::exp(2 * yy[n + j]);
      };

      auto grid = slot_grid(stage.x0, stage.x1, stage.b,
                            std::max<std::size_t>(opt.samples_per_slot, 8));
      std::vector<double> anchor_x = {stage.x0};
      std::vector<double> anchor_sigma = {y[t]};

      OdeOptions oopt;
      oopt.rtol = oopt.atol = opt.ode_tol;
      double max_gp = 1.0;
      for (const auto& fd : fds) max_gp = std::max(max_gp, fd.max_gamma_prime());
      oopt.h_max = 0.5 / max_gp;  // keep the phase rotation resolved even
                                  // where the drive amplitude is tiny
      Dopri5<decltype(rhs)> solver(3 * n);
      solver.integrate_sampled(
          rhs, stage.x0, stage.x1, y, oopt, grid,
          [&](double x, const std::vector<double>& yy) {
            anchor_x.push_back(x);
            anchor_sigma.push_back(yy[t]);
            for (std::size_t j = 0; j < n; ++j) {
              auto& tr = out.trajectories[j];
              tr.grid.push_back(x);
              tr.ln_r.push_back(yy[n + j]);
              tr.theta.push_back(yy[j] + fds[j].gamma(x));
            }
          },
          [&](double x, const std::vector<double>& yy) {
            double d = 1 + x - stage.b;
            double cf = stage_cutoff(x, stage.x0, stage.x1, width);
            double v = -c_drive * cf *
                       std::sin(2 * (yy[t] + fds[t].gamma(x))) / d;
            double env = std::abs(v) * (1 + x);
            rec.envelope_sup = std::max(rec.envelope_sup, env);
            if (s.h)
              rec.envelope_h_sup = std::max(rec.envelope_h_sup, env / s.h(x));
          });

      out.potential.add_stage(
          stage, StagePotential(stage, &fds[t], std::move(anchor_x),
                                std::move(anchor_sigma), opt.pot_tol));
    }

    rec.envelope_norm =
        rec.envelope_sup / (static_cast<double>(s.n[w]) *
                            static_cast<double>(s.c[w]) *
                            static_cast<double>(s.c[w]));
    rec.ln_r.assign(y.begin() + static_cast<std::ptrdiff_t>(n),
                    y.begin() + static_cast<std::ptrdiff_t>(2 * n));
    rec.q.assign(y.begin() + static_cast<std::ptrdiff_t>(2 * n), y.end());
    out.envelope_sup = std::max(out.envelope_sup, rec.envelope_sup);
    out.envelope_h_sup = std::max(out.envelope_h_sup, rec.envelope_h_sup);
    out.epochs.push_back(rec);
  }

  out.potential.set_range(j0, static_cast<double>(s.j[W]));

  for (int w = 1; w <= W; ++w) {
    for (std::size_t j = 0; j < n; ++j) {
      ContractRecord c;
      c.eig = static_cast<int>(j);
      c.w = w;
      c.activated = s.n[w] > static_cast<std::int64_t>(j);
      c.measured = std::exp(out.epochs[static_cast<std::size_t>(w)].ln_r[j] -
                            out.epochs[static_cast<std::size_t>(w) - 1].ln_r[j]);
      c.bound = c.activated ? s.contract_factor(w) : s.growth_cap(w);
      c.pass = c.measured <= c.bound * (1 + opt.contract_slack);
      out.contract_pass = out.contract_pass && c.pass;
      out.contract.push_back(c);
    }
  }
  if (opt.throw_on_contract && !out.contract_pass) {
    std::ostringstream err;
    err << "epoch contract failed:";
    for (const auto& c : out.contract)
      if (!c.pass)
        err << " [eig " << c.eig << " epoch " << c.w << ": " << c.measured
            << " > " << c.bound << "]";
    throw StageError(err.str());
  }
  return out;
}

L2Report verify_l2(const Assembly& a, double ratio_bound) {
  return verify_l2(a.schedule, a.epochs, ratio_bound);
}

L2Report verify_l2(const Schedule& s, const std::vector<EpochRecord>& epochs,
                   double ratio_bound) {
  L2Report rep;
  rep.ratio_bound = ratio_bound;
  const std::size_t n = s.eigenvalues.size();
  const bool enforce = s.mode == GrowthMode::finite;
  for (std::size_t j = 0; j < n; ++j) {
    double prev_tail = 0.0;
    for (int w = 1; w <= s.epochs(); ++w) {
      const auto& cur = epochs[static_cast<std::size_t>(w)];
      const auto& before = epochs[static_cast<std::size_t>(w) - 1];
      L2Tail t;
      t.eig = static_cast<int>(j);
      t.w = w;
      t.tail = cur.q[j] - before.q[j];
      if (w > 1 && prev_tail > 0) {
        t.ratio = t.tail / prev_tail;
        t.theta = -std::log(t.ratio) /
                  std::log(static_cast<double>(s.c[w]));
        t.asserted = enforce && w > s.activation_epoch(static_cast<int>(j));
        t.pass = !t.asserted || t.ratio <= ratio_bound;
      }
      rep.pass = rep.pass && t.pass;
      prev_tail = t.tail;
      rep.tails.push_back(t);
    }
  }
  return rep;
}

}  // namespace emband
