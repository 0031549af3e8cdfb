#include "emband/wvn_stage.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "emband/interp.hpp"
#include "emband/ode.hpp"
#include "emband/prufer.hpp"

namespace emband {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double bump(double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; }

// Geometric grid in d = 1+x-b covering [x0, x1] with n points.
std::vector<double> stage_grid(double x0, double x1, double b, std::size_t n) {
  double d0 = 1 + x0 - b;
  double d1 = 1 + x1 - b;
  std::vector<double> g(n);
  double step = std::log(d1 / d0) / static_cast<double>(n - 1);
  g[0] = x0;
  for (std::size_t i = 1; i + 1 < n; ++i)
    g[i] = b - 1 + d0 * std::exp(step * static_cast<double>(i));
  g[n - 1] = x1;
  return g;
}

struct StageFrame {
  const Stage& st;
  const FloquetData& fd;
  double w;

  double cutoff(double x) const { return stage_cutoff(x, st.x0, st.x1, w); }

  // sigma-dot of the stage flow and the matched lnR-dot, given sigma.
  void flow(double x, double sigma, double& dsigma, double& dlnr) const {
    double d = 1 + x - st.b;
    double cf = cutoff(x);
    double g = fd.gamma_prime(x);
    double th = sigma + fd.gamma(x);
    double s2 = std::sin(2 * th);
    double s = std::sin(th);
    double a = st.c * cf / (g * d);
    dsigma = a * s2 * s * s;
    dlnr = -0.5 * a * s2 * s2;
  }

  double potential(double x, double sigma) const {
    double d = 1 + x - st.b;
    return -st.c * cutoff(x) * std::sin(2 * (sigma + fd.gamma(x))) / d;
  }
};

}  // namespace

double mollifier_step(double t) {
  if (t <= 0) return 0.0;
  if (t >= 1) return 1.0;
  double a = bump(t);
  return a / (a + bump(1 - t));
}

double stage_cutoff(double x, double x0, double x1, double w) {
  return mollifier_step((x - x0) / w) * mollifier_step((x1 - x) / w);
}

double Stage::width() const {
  if (mollify_width > 0) return mollify_width;
  return std::min(1.0, (x1 - x0) / 100.0);
}

void validate_stage(const Stage& stage, double k_target,
                    const std::vector<double>& k_protected,
                    const StageOptions& opt, bool enforce_k_min) {
  std::ostringstream err;
  if (!(stage.b < stage.x0 && stage.x0 < stage.x1))
    throw StageError("stage geometry requires b < x0 < x1");
  if (stage.c < 0) throw StageError("stage coupling must be nonnegative");
  if (enforce_k_min && !(stage.x0 - stage.b >= opt.k_min)) {
    err << "stage admissibility: x0 - b = " << stage.x0 - stage.b << " < "
        << opt.k_min;
    throw StageError(err.str());
  }
  if (std::abs(k_target - kPi / 2) < opt.angular_tol)
    throw StageError("target quasimomentum too close to pi/2");
  for (double kh : k_protected) {
    if (std::abs(kh - k_target) < opt.angular_tol) {
      err << "protected energy shares the target quasimomentum k = " << kh;
      throw StageError(err.str());
    }
    if (std::abs(kh + k_target - kPi) < opt.angular_tol) {
      err << "resonant pair: k + k_hat = pi within tolerance (k = " << k_target
          << ", k_hat = " << kh << ")";
      throw StageError(err.str());
    }
  }
}

StageTrajectory solve_stage_theta_from_phase(const Stage& stage,
                                             const FloquetData& fd,
                                             double psi0,
                                             const StageOptions& opt) {
  validate_stage(stage, fd.k, {}, opt, false);
  StageFrame frame{stage, fd, stage.width()};

  StageTrajectory traj;
  traj.e = fd.e;
  traj.b = stage.b;
  traj.c = stage.c;
  traj.x0 = stage.x0;
  traj.x1 = stage.x1;
  traj.width = frame.w;
  traj.psi0 = psi0;
  traj.grid = stage_grid(stage.x0, stage.x1, stage.b,
                         std::max<std::size_t>(opt.n_samples, 9));
  traj.theta.reserve(traj.grid.size());
  traj.ln_r.reserve(traj.grid.size());

  auto rhs = [&](double x, const std::vector<double>& y,
                 std::vector<double>& dy) {
    frame.flow(x, y[0], dy[0], dy[1]);
  };
  std::vector<double> y = {psi0 - fd.gamma(stage.x0), 0.0};
  OdeOptions oopt;
  oopt.rtol = oopt.atol = opt.ode_tol;
  Dopri5<decltype(rhs)> solver(2);
  solver.integrate_sampled(rhs, stage.x0, stage.x1, y, oopt, traj.grid,
                           [&](double x, const std::vector<double>& s) {
                             traj.theta.push_back(s[0] + fd.gamma(x));
                             traj.ln_r.push_back(s[1]);
                           });
  return traj;
}

StageTrajectory solve_stage_theta(const Stage& stage, const FloquetData& fd,
                                  const StageOptions& opt) {
  double psi0 =
      initial_prufer_angle(BoundaryCondition{stage.theta0, stage.x0}, fd);
  return solve_stage_theta_from_phase(stage, fd, psi0, opt);
}

StagePotential::StagePotential(const Stage& stage, const FloquetData* fd,
                               std::vector<double> anchor_x,
                               std::vector<double> anchor_sigma, double ode_tol)
    : fd_(fd),
      ax_(std::move(anchor_x)),
      asigma_(std::move(anchor_sigma)),
      x0_(stage.x0),
      x1_(stage.x1),
      b_(stage.b),
      c_(stage.c),
      w_(stage.width()),
      ode_tol_(ode_tol) {}

double StagePotential::sigma_at(double x, double anchor_x,
                                double anchor_sigma) const {
  if (x <= anchor_x) return anchor_sigma;
  Stage st;
  st.x0 = x0_;
  st.x1 = x1_;
  st.b = b_;
  st.c = c_;
  st.mollify_width = w_;
  StageFrame frame{st, *fd_, w_};
  auto rhs = [&](double t, const std::vector<double>& y,
                 std::vector<double>& dy) {
    double dlnr;
    frame.flow(t, y[0], dy[0], dlnr);
  };
  std::vector<double> y = {anchor_sigma};
  OdeOptions oopt;
  oopt.rtol = oopt.atol = ode_tol_;
  Dopri5<decltype(rhs)> solver(1);
  solver.integrate(rhs, anchor_x, x, y, oopt);
  return y[0];
}

double StagePotential::operator()(double x) const {
  if (!fd_ || x <= x0_ || x >= x1_) return 0.0;
  auto it = std::upper_bound(ax_.begin(), ax_.end(), x);
  auto i = static_cast<std::size_t>(std::distance(ax_.begin(), it)) - 1;
  double sigma = sigma_at(x, ax_[i], asigma_[i]);
  Stage st;
  st.x0 = x0_;
  st.x1 = x1_;
  st.b = b_;
  st.c = c_;
  st.mollify_width = w_;
  StageFrame frame{st, *fd_, w_};
  return frame.potential(x, sigma);
}

std::vector<double> StagePotential::eval_sorted(
    const std::vector<double>& xs) const {
  std::vector<double> out(xs.size(), 0.0);
  if (!fd_) return out;
  double cur_x = ax_.front();
  double cur_sigma = asigma_.front();
  Stage st;
  st.x0 = x0_;
  st.x1 = x1_;
  st.b = b_;
  st.c = c_;
  st.mollify_width = w_;
  StageFrame frame{st, *fd_, w_};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double x = xs[i];
    if (x <= x0_ || x >= x1_) continue;
    if (x < cur_x) {  // out-of-order input: restart from the best anchor
      auto it = std::upper_bound(ax_.begin(), ax_.end(), x);
      auto j = static_cast<std::size_t>(std::distance(ax_.begin(), it)) - 1;
      cur_x = ax_[j];
      cur_sigma = asigma_[j];
    }
    cur_sigma = sigma_at(x, cur_x, cur_sigma);
    cur_x = x;
    out[i] = frame.potential(x, cur_sigma);
  }
  return out;
}

StagePotential stage_potential(const Stage& stage, const FloquetData& fd,
                               const StageTrajectory& traj, double ode_tol) {
  std::vector<double> sig(traj.grid.size());
  for (std::size_t i = 0; i < traj.grid.size(); ++i)
    sig[i] = traj.theta[i] - fd.gamma(traj.grid[i]);
  return StagePotential(stage, &fd, traj.grid, std::move(sig), ode_tol);
}

namespace {

// Max of ln R(x, Ehat)/R(x0, Ehat) over one probe trajectory: the probe and
// the drive are co-integrated so the drive is exact at every RHS evaluation.
double probe_max_lnr(const Stage& stage, const FloquetData& fd_target,
                     double drive_sigma0, const FloquetData& fd_probe,
                     double probe_angle, const StageOptions& opt) {
  StageFrame frame{stage, fd_target, stage.width()};
  auto rhs = [&](double x, const std::vector<double>& y,
                 std::vector<double>& dy) {
    double dlnr_drive;
    frame.flow(x, y[0], dy[0], dlnr_drive);
    double v = frame.potential(x, y[0]);
    double gp = fd_probe.gamma_prime(x);
    double th = y[1] + fd_probe.gamma(x);
    double s = std::sin(th);
    dy[1] = -(v / gp) * s * s;
    dy[2] = 0.5 * (v / gp) * std::sin(2 * th);
  };
  double psi0 =
      initial_prufer_angle(BoundaryCondition{probe_angle, stage.x0}, fd_probe);
  std::vector<double> y = {drive_sigma0, psi0 - fd_probe.gamma(stage.x0), 0.0};
  OdeOptions oopt;
  oopt.rtol = oopt.atol = opt.ode_tol;
  double peak = 0.0;
  Dopri5<decltype(rhs)> solver(3);
  solver.integrate(rhs, stage.x0, stage.x1, y, oopt,
                   [&](double, const std::vector<double>& s) {
                     peak = std::max(peak, s[2]);
                   });
  return std::max(peak, y[2]);
}

std::vector<double> probe_batch(const Stage& stage,
                                const FloquetData& fd_target,
                                double drive_sigma0,
                                const std::vector<FloquetData>& fd_protected,
                                const std::vector<double>& angles,
                                const StageOptions& opt) {
  auto n = fd_protected.size() * angles.size();
  std::vector<double> peaks(n);
  if (opt.parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      auto idx = static_cast<std::size_t>(i);
      peaks[idx] = probe_max_lnr(stage, fd_target, drive_sigma0,
                                 fd_protected[idx / angles.size()],
                                 angles[idx % angles.size()], opt);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      peaks[i] = probe_max_lnr(stage, fd_target, drive_sigma0,
                               fd_protected[i / angles.size()],
                               angles[i % angles.size()], opt);
  }
  return peaks;
}

std::vector<double> probe_angles() {
  std::vector<double> a(8);
  for (int j = 0; j < 8; ++j) a[j] = kPi * j / 8.0;
  return a;
}

}  // namespace

OscillationReport oscillation_diagnostic(const Stage& stage,
                                         const FloquetData& fd,
                                         const FloquetData* fd_other,
                                         double half_point,
                                         const StageOptions& opt) {
  if (fd_other) {
    if (std::abs(fd_other->k - fd.k) < opt.angular_tol)
      throw StageError("oscillation diagnostic requires distinct energies");
    if (std::abs(fd_other->k + fd.k - kPi) < opt.angular_tol) {
      std::ostringstream err;
      err << "resonant pair: k + k_hat = pi within tolerance (k = " << fd.k
          << ", k_hat = " << fd_other->k << ")";
      throw StageError(err.str());
    }
  }
  StageFrame frame{stage, fd, stage.width()};
  double psi0 =
      initial_prufer_angle(BoundaryCondition{stage.theta0, stage.x0}, fd);
  double psi0_other =
      fd_other ? initial_prufer_angle(BoundaryCondition{stage.theta0, stage.x0},
                                      *fd_other)
               : 0.0;

  // y = [sigma, I_cos4] or [sigma, sigma_hat, I_cos4, I_cross]
  auto rhs = [&](double x, const std::vector<double>& y,
                 std::vector<double>& dy) {
    double dlnr;
    frame.flow(x, y[0], dy[0], dlnr);
    double d = 1 + x - stage.b;
    double th = y[0] + fd.gamma(x);
    if (!fd_other) {
      dy[1] = std::cos(4 * th) / d;
      return;
    }
    double v = frame.potential(x, y[0]);
    double gp = fd_other->gamma_prime(x);
    double th_hat = y[1] + fd_other->gamma(x);
    double s = std::sin(th_hat);
    dy[1] = -(v / gp) * s * s;
    dy[2] = std::cos(4 * th) / d;
    dy[3] = std::sin(2 * th) * std::sin(2 * th_hat) / (2 * gp * d);
  };

  std::size_t dim = fd_other ? 4 : 2;
  std::vector<double> y(dim, 0.0);
  y[0] = psi0 - fd.gamma(stage.x0);
  if (fd_other) y[1] = psi0_other - fd_other->gamma(stage.x0);

  if (half_point <= 0) {
    double d0 = 1 + stage.x0 - stage.b;
    double d1 = 1 + stage.x1 - stage.b;
    half_point = stage.b - 1 + std::sqrt(d0 * d1);
  }

  OscillationReport rep;
  rep.has_cross = fd_other != nullptr;
  std::size_t i_cos = fd_other ? 2 : 1;
  OdeOptions oopt;
  oopt.rtol = oopt.atol = opt.ode_tol;
  Dopri5<decltype(rhs)> solver(dim);
  auto watch = [&](double, const std::vector<double>& s) {
    rep.sup_target = std::max(rep.sup_target, std::abs(s[i_cos]));
    if (fd_other) rep.sup_cross = std::max(rep.sup_cross, std::abs(s[3]));
  };
  solver.integrate(rhs, stage.x0, std::min(half_point, stage.x1), y, oopt,
                   watch);
  rep.sup_target_half = rep.sup_target;
  rep.sup_cross_half = rep.sup_cross;
  if (half_point < stage.x1)
    solver.integrate(rhs, half_point, stage.x1, y, oopt, watch);
  return rep;
}

StageReport check_stage_contract(const Stage& stage, const FloquetData& fd,
                                 const std::vector<FloquetData>& fd_protected,
                                 double decay_exponent,
                                 const StageOptions& opt) {
  std::vector<double> k_protected;
  for (const auto& f : fd_protected) k_protected.push_back(f.k);
  validate_stage(stage, fd.k, k_protected, opt, true);

  StageReport rep;
  auto add = [&](const std::string& name, bool pass, double measured,
                 double bound, const std::string& detail = "") {
    rep.checks.push_back({name, pass, measured, bound, detail});
    rep.all_pass = rep.all_pass && pass;
  };

  auto traj = solve_stage_theta(stage, fd, opt);

  std::vector<double> lx, lr;
  double d0 = 1 + stage.x0 - stage.b;
  for (std::size_t i = 0; i < traj.grid.size(); ++i) {
    double x = traj.grid[i];
    if (x < stage.x0 + traj.width || x > stage.x1 - traj.width) continue;
    lx.push_back(std::log((1 + x - stage.b) / d0));
    lr.push_back(traj.ln_r[i]);
  }
  auto fit = fit_line(lx, lr);
  rep.slope = fit.slope;
  rep.slope_bound = -decay_exponent * (1 - opt.slope_slack_factor);
  add("target-decay-slope", fit.slope <= rep.slope_bound, fit.slope,
      rep.slope_bound);

  double worst_rise = 0.0;
  for (std::size_t i = 1; i < traj.ln_r.size(); ++i)
    worst_rise = std::max(worst_rise, traj.ln_r[i] - traj.ln_r[i - 1]);
  add("target-monotone", worst_rise <= 1e-8, worst_rise, 1e-8,
      "max increase of lnR between samples");

  if (!fd_protected.empty()) {
    auto angles = probe_angles();
    auto peaks = probe_batch(stage, fd, traj.psi0 - fd.gamma(stage.x0),
                             fd_protected, angles, opt);
    double worst = *std::max_element(peaks.begin(), peaks.end());
    rep.max_protected_ratio = std::exp(worst);
    add("protected-ratio-2", rep.max_protected_ratio <= 2.0,
        rep.max_protected_ratio, 2.0,
        "max R(x,Ehat)/R(x0,Ehat) over probes");
    if (stage.x0 - stage.b >= opt.k_min)
      add("protected-ratio-1.5", rep.max_protected_ratio <= 1.5,
          rep.max_protected_ratio, 1.5, "strengthened bound past k_min");
  }

  auto osc_t = oscillation_diagnostic(stage, fd, nullptr, 0.0, opt);
  bool ok_t = osc_t.sup_target < 1e-6 ||
              osc_t.sup_target_half >= 0.8 * osc_t.sup_target;
  add("oscillation-target", ok_t, osc_t.sup_target, osc_t.sup_target_half,
      "sup |int cos4theta/(1+y-b)|; bound column holds the half-range sup");
  for (std::size_t j = 0; j < fd_protected.size(); ++j) {
    auto osc = oscillation_diagnostic(stage, fd, &fd_protected[j], 0.0, opt);
    bool ok = osc.sup_cross < 1e-6 || osc.sup_cross_half >= 0.8 * osc.sup_cross;
    add("oscillation-cross-" + std::to_string(j), ok, osc.sup_cross,
        osc.sup_cross_half, "cross partial-sum sup vs half-range sup");
  }
  return rep;
}

double calibrate_stage_threshold(const Stage& prototype, const FloquetData& fd,
                                 const std::vector<FloquetData>& fd_protected,
                                 const std::vector<double>& candidates,
                                 const StageOptions& opt) {
  if (fd_protected.empty())
    throw StageError("calibration needs at least one protected energy");
  double ratio = (1 + prototype.x1 - prototype.b) /
                 (1 + prototype.x0 - prototype.b);
  auto angles = probe_angles();
  for (double q : candidates) {
    Stage st = prototype;
    st.b = 0;
    st.x0 = q;
    st.x1 = (1 + q) * ratio - 1;
    auto traj_psi0 =
        initial_prufer_angle(BoundaryCondition{st.theta0, st.x0}, fd);
    auto peaks = probe_batch(st, fd, traj_psi0 - fd.gamma(st.x0), fd_protected,
                             angles, opt);
    double worst = *std::max_element(peaks.begin(), peaks.end());
    if (std::exp(worst) <= 1.5) return q;
  }
  throw StageError("no candidate threshold achieves the 1.5 ratio");
}

}  // namespace emband
