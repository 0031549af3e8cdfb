#include "emband/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace emband {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r))
    throw ScheduleError("schedule length overflows the 64-bit range");
  return r;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_add_overflow(a, b, &r))
    throw ScheduleError("schedule length overflows the 64-bit range");
  return r;
}

std::int64_t count_at(GrowthMode mode, int w, std::size_t n_eigs,
                      int n_every) {
  if (w <= 0) return 1;  // silent-prefix convention
  if (mode == GrowthMode::finite)
    return std::min<std::int64_t>(w, static_cast<std::int64_t>(n_eigs));
  return (w + n_every - 1) / n_every;
}

}  // namespace

std::vector<EpochSlot> Schedule::slots(int w) const {
  std::vector<EpochSlot> out;
  if (w <= 0 || w > epochs()) return out;
  for (std::int64_t slot = 0; slot < n[w]; ++slot) {
    EpochSlot e;
    e.eig_index = static_cast<int>(slot);
    e.b = slot * t[w];
    e.x0 = j[w - 1] + e.b;
    e.x1 = e.x0 + t[w];
    out.push_back(e);
  }
  return out;
}

double Schedule::contract_factor(int w) const {
  if (w <= 0 || w > epochs()) return 1.0;
  return std::pow(2.0, static_cast<double>(n[w])) *
         std::pow(static_cast<double>(n[w - 1]), p) /
         std::pow(static_cast<double>(c[w]), p_prime);
}

double Schedule::growth_cap(int w) const {
  if (w <= 0 || w > epochs()) return 1.0;
  return std::pow(2.0, static_cast<double>(n[w]));
}

int Schedule::activation_epoch(int eig) const {
  for (int w = 1; w <= epochs(); ++w)
    if (n[w] > eig) return w;
  return epochs() + 1;
}

double envelope_min(const std::function<double(double)>& h, double lo,
                    double hi, std::size_t samples) {
  double a = 1 + lo, b = 1 + hi;
  double best = h(lo);
  for (std::size_t i = 1; i < samples; ++i) {
    double x = a * std::pow(b / a, static_cast<double>(i) /
                                       static_cast<double>(samples - 1)) -
               1;
    best = std::min(best, h(x));
  }
  return best;
}

namespace {

struct Shadow {  // trial schedule during the infinite-mode C search
  std::vector<std::int64_t> n, t, j;
};

Shadow roll(const SchedulePolicy& pol, GrowthMode mode, std::size_t n_eigs,
            std::int64_t c_const) {
  Shadow s;
  int W = pol.epochs;
  s.n.resize(W + 1);
  s.t.resize(W + 1);
  s.j.resize(W + 1);
  for (int w = 0; w <= W; ++w)
    s.n[w] = count_at(mode, w, n_eigs, pol.n_every);
  s.t[0] = s.j[0] = pol.t0;
  for (int w = 1; w <= W; ++w) {
    s.t[w] = checked_mul(s.t[w - 1], c_const);
    s.j[w] = checked_add(s.j[w - 1], checked_mul(s.n[w], s.t[w]));
  }
  return s;
}

// Epoch-w feasibility of a constant-C infinite schedule: the quadratic
// envelope budget C^2 N(w) <= factor * min h, and the pointwise budget
// C * (1+J_w) <= h(J_{w-1}) * (1+J_{w-1}) that keeps |V|(1+x) under h.
bool infinite_feasible(const Shadow& s, std::int64_t c_const,
                       const SchedulePolicy& pol,
                       const std::function<double(double)>& h) {
  for (std::size_t w = 1; w < s.t.size(); ++w) {
    double jm = static_cast<double>(s.j[w - 1]);
    double jw = static_cast<double>(s.j[w]);
    double hmin = envelope_min(h, jm, jw);
    double cc = static_cast<double>(c_const);
    if (cc * cc * static_cast<double>(s.n[w]) > pol.gapr_factor * hmin)
      return false;
    if (cc * (1 + jw) > h(jm) * (1 + jm)) return false;
  }
  return true;
}

double pow_margin(double value, double base, double expo) {
  // value / base^expo without overflowing: exp(log value - expo log base)
  return std::exp(std::log(value) - expo * std::log(base));
}

void record_audits(Schedule& s, const SchedulePolicy& pol,
                   const std::function<double(double)>& h, std::size_t n_eigs) {
  int W = s.epochs();

  ScheduleConstraint len;
  len.name = "length-growth";
  len.strict_form = "T_w >= 1000^w";
  len.scaled_form = "T_w >= " + std::to_string(pol.gtk_base) + "^w";
  len.strict_margin = len.scaled_margin = 1e300;
  for (int w = 1; w <= W; ++w) {
    double tw = static_cast<double>(s.t[w]);
    len.strict_margin = std::min(len.strict_margin, pow_margin(tw, 1000.0, w));
    len.scaled_margin = std::min(
        len.scaled_margin, pow_margin(tw, static_cast<double>(pol.gtk_base), w));
  }
  len.strict_holds = len.strict_margin >= 1.0;
  len.scaled_holds = len.scaled_margin >= 1.0;
  len.enforced = true;
  s.audits.push_back(len);

  ScheduleConstraint cpl;
  cpl.name = "coupling-count";
  cpl.strict_form = "C_w >= 4^{N(w+1)}";
  cpl.scaled_form =
      "C_w >= " + std::to_string(pol.addliu_base) + "^{N(w+1)}";
  cpl.strict_margin = cpl.scaled_margin = 1e300;
  for (int w = 1; w <= W; ++w) {
    double next_n = static_cast<double>(
        count_at(s.mode, w + 1, n_eigs, pol.n_every));
    double cw = static_cast<double>(s.c[w]);
    cpl.strict_margin = std::min(cpl.strict_margin, pow_margin(cw, 4.0, next_n));
    cpl.scaled_margin =
        std::min(cpl.scaled_margin,
                 pow_margin(cw, static_cast<double>(pol.addliu_base), next_n));
  }
  cpl.strict_holds = cpl.strict_margin >= 1.0;
  cpl.scaled_holds = cpl.scaled_margin >= 1.0;
  cpl.enforced = s.mode == GrowthMode::finite;
  s.audits.push_back(cpl);

  if (s.mode == GrowthMode::infinite) {
    ScheduleConstraint env;
    env.name = "envelope-budget";
    env.strict_form = "C_w^2 N(w) <= (1/100) min h on [J_{w-1}, J_w]";
    std::ostringstream sf;
    sf << "C_w^2 N(w) <= " << pol.gapr_factor << " min h on [J_{w-1}, J_w]";
    env.scaled_form = sf.str();
    env.strict_margin = env.scaled_margin = 1e300;
    for (int w = 1; w <= W; ++w) {
      double hmin = envelope_min(h, static_cast<double>(s.j[w - 1]),
                                 static_cast<double>(s.j[w]));
      double lhs = static_cast<double>(s.c[w]) * static_cast<double>(s.c[w]) *
                   static_cast<double>(s.n[w]);
      env.strict_margin = std::min(env.strict_margin, 0.01 * hmin / lhs);
      env.scaled_margin =
          std::min(env.scaled_margin, pol.gapr_factor * hmin / lhs);
    }
    env.strict_holds = env.strict_margin >= 1.0;
    env.scaled_holds = env.scaled_margin >= 1.0;
    env.enforced = true;
    s.audits.push_back(env);
  }
}

}  // namespace

Schedule build_schedule(const std::vector<double>& eigs,
                        const std::vector<double>& angles, GrowthMode mode,
                        const SchedulePolicy& policy,
                        const std::function<double(double)>& h) {
  if (eigs.empty()) throw ScheduleError("schedule needs at least one eigenvalue");
  if (angles.size() != eigs.size())
    throw ScheduleError("one boundary angle per eigenvalue required");
  if (policy.epochs < 1) throw ScheduleError("schedule needs at least one epoch");
  if (policy.t0 < 1) throw ScheduleError("epoch-0 length must be positive");
  for (std::size_t i = 0; i < eigs.size(); ++i)
    for (std::size_t k = i + 1; k < eigs.size(); ++k)
      if (eigs[i] == eigs[k])
        throw ScheduleError("eigenvalues must be distinct");

  Schedule s;
  s.mode = mode;
  s.eigenvalues = eigs;
  s.boundary_angles = angles;
  s.p = policy.p;
  s.p_prime = policy.p_prime;
  s.decay_exponent = policy.decay_exponent;
  int W = policy.epochs;

  s.n.resize(W + 1);
  for (int w = 0; w <= W; ++w)
    s.n[w] = count_at(mode, w, eigs.size(), policy.n_every);
  if (s.n[W] > static_cast<std::int64_t>(eigs.size()))
    throw ScheduleError(
        "not enough eigenvalues: epoch " + std::to_string(W) + " activates " +
        std::to_string(s.n[W]));

  s.c.assign(W + 1, 1);
  if (mode == GrowthMode::finite) {
    std::int64_t drive =
        static_cast<std::int64_t>(std::ceil(4 * policy.decay_exponent * policy.g_max));
    s.stage_coupling = 4 * policy.decay_exponent * policy.g_max;
    if (policy.coupling_override > 0) {
      drive = static_cast<std::int64_t>(std::ceil(policy.coupling_override));
      s.stage_coupling = static_cast<double>(drive);
    }
    for (int w = 1; w <= W; ++w) {
      std::int64_t next_n = count_at(mode, w + 1, eigs.size(), policy.n_every);
      std::int64_t floor_c = 1;
      for (std::int64_t i = 0; i < next_n; ++i)
        floor_c = checked_mul(floor_c, policy.addliu_base);
      s.c[w] = std::max(drive, floor_c);
    }
  } else {
    if (!h) throw ScheduleError("infinite mode needs an envelope function h");
    s.p_prime = std::min(policy.p_prime, 1.0);  // slow growth: relaxed exponent
    std::int64_t chosen = 0;
    for (std::int64_t cc = policy.c_max; cc >= 2; --cc) {
      Shadow trial = roll(policy, mode, eigs.size(), cc);
      if (infinite_feasible(trial, cc, policy, h)) {
        chosen = cc;
        break;
      }
    }
    if (chosen == 0)
      throw ScheduleError(
          "infeasible scaling: no constant length factor C >= 2 fits the "
          "envelope budget for the supplied h");
    for (int w = 1; w <= W; ++w) s.c[w] = chosen;
    s.stage_coupling = static_cast<double>(chosen);
    s.h = h;
  }

  s.t.assign(W + 1, 0);
  s.j.assign(W + 1, 0);
  s.t[0] = s.j[0] = policy.t0;
  for (int w = 1; w <= W; ++w) {
    s.t[w] = checked_mul(s.t[w - 1], s.c[w]);
    s.j[w] = checked_add(s.j[w - 1], checked_mul(s.n[w], s.t[w]));
  }

  record_audits(s, policy, h, eigs.size());
  for (const auto& a : s.audits)
    if (a.enforced && !a.scaled_holds)
      throw ScheduleError("scaled constraint violated: " + a.name);
  return s;
}

}  // namespace emband
