#pragma once

// Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4), FSAL).
// States are flat vectors of doubles so callers can pack coupled systems
// (phases, log-amplitudes, running quadratures) into one integration.
// The driver can be asked to land exactly on prescribed sample points, so
// recorded trajectories and quadrature states carry full integrator accuracy.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace emband {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-10;
  double h_init = 0.0;        // 0: choose automatically
  double h_max = 0.0;         // 0: no cap
  std::size_t max_steps = 0;  // 0: unlimited
};

class OdeError : public std::runtime_error {
 public:
  explicit OdeError(const std::string& what) : std::runtime_error(what) {}
};

// Integrates y' = f(x, y) from x0 to x1 (x1 > x0).
//
// Rhs:      void(double x, const std::vector<double>& y, std::vector<double>& dy)
// OnStep:   called after every accepted step as on_step(x, y); pass nullptr-like
//           no-op lambda when not needed.
template <class Rhs>
class Dopri5 {
 public:
  explicit Dopri5(std::size_t dim) : n_(dim) {
    for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ytmp_, &yerr_, &ynew_})
      v->assign(n_, 0.0);
  }

  std::size_t steps_taken() const { return n_steps_; }
  std::size_t steps_rejected() const { return n_rejected_; }

  template <class OnStep>
  void integrate(Rhs& f, double x0, double x1, std::vector<double>& y,
                 const OdeOptions& opt, OnStep&& on_step) {
    const std::vector<double> no_samples;
    integrate_impl(f, x0, x1, y, opt, no_samples, [](double, const std::vector<double>&) {},
                   std::forward<OnStep>(on_step));
  }

  void integrate(Rhs& f, double x0, double x1, std::vector<double>& y, const OdeOptions& opt) {
    integrate(f, x0, x1, y, opt, [](double, const std::vector<double>&) {});
  }

  // Lands exactly on every point of `samples` (ascending, within [x0, x1]);
  // on_sample(x, y) is invoked there with the integrated state.
  template <class OnSample, class OnStep>
  void integrate_sampled(Rhs& f, double x0, double x1, std::vector<double>& y,
                         const OdeOptions& opt, const std::vector<double>& samples,
                         OnSample&& on_sample, OnStep&& on_step) {
    integrate_impl(f, x0, x1, y, opt, samples, std::forward<OnSample>(on_sample),
                   std::forward<OnStep>(on_step));
  }

  template <class OnSample>
  void integrate_sampled(Rhs& f, double x0, double x1, std::vector<double>& y,
                         const OdeOptions& opt, const std::vector<double>& samples,
                         OnSample&& on_sample) {
    integrate_impl(f, x0, x1, y, opt, samples, std::forward<OnSample>(on_sample),
                   [](double, const std::vector<double>&) {});
  }

 private:
  template <class OnSample, class OnStep>
  void integrate_impl(Rhs& f, double x0, double x1, std::vector<double>& y,
                      const OdeOptions& opt, const std::vector<double>& samples,
                      OnSample&& on_sample, OnStep&& on_step) {
    if (y.size() != n_) throw OdeError("state dimension mismatch");
    if (!(x1 > x0)) {
      if (x1 == x0) return;
      throw OdeError("integration requires x1 >= x0");
    }

    rtol_ = opt.rtol;
    atol_ = opt.atol;

    double x = x0;
    std::size_t next_sample = 0;
    while (next_sample < samples.size() && samples[next_sample] <= x0 + snap_(x0))
      on_sample(samples[next_sample++], y);

    f(x, y, k1_);
    double h = opt.h_init > 0 ? opt.h_init : initial_step_(x, y, opt);
    if (opt.h_max > 0) h = std::min(h, opt.h_max);

    n_steps_ = 0;
    n_rejected_ = 0;

    while (x < x1 - snap_(x1)) {
      if (opt.max_steps && n_steps_ + n_rejected_ > opt.max_steps)
        throw OdeError("step budget exhausted");

      double stop = x1;
      bool stop_is_sample = false;
      if (next_sample < samples.size() && samples[next_sample] < x1) {
        stop = samples[next_sample];
        stop_is_sample = true;
      }

      if (stop - x < min_step_(x)) {
        // Stop point within representational resolution: snap without stepping.
        x = stop;
        if (stop_is_sample) {
          on_sample(samples[next_sample++], y);
          while (next_sample < samples.size() && samples[next_sample] <= x + snap_(x))
            on_sample(samples[next_sample++], y);
        }
        continue;
      }
      double h_try = std::min(h, stop - x);

      double err = attempt_step_(f, x, y, h_try);
      if (err <= 1.0) {
        x += h_try;
        y.swap(ynew_);
        k1_.swap(k7_);  // FSAL
        ++n_steps_;
        on_step(x, y);
        if (stop_is_sample && x >= stop - snap_(stop)) {
          x = stop;
          on_sample(samples[next_sample++], y);
          while (next_sample < samples.size() &&
                 samples[next_sample] <= x + snap_(x))
            on_sample(samples[next_sample++], y);
        }
        double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
        h = h_try * std::min(std::max(fac, 0.2), 10.0);
      } else {
        ++n_rejected_;
        double fac = 0.9 * std::pow(err, -0.2);
        h = h_try * std::min(std::max(fac, 0.1), 0.9);
        if (h < min_step_(x))
          throw OdeError("step size underflow at x=" + std::to_string(x));
      }
      if (opt.h_max > 0) h = std::min(h, opt.h_max);
    }

    while (next_sample < samples.size() && samples[next_sample] <= x1 + snap_(x1))
      on_sample(samples[next_sample++], y);
  }

  // One trial step of size h from (x, y) with k1_ valid. Fills ynew_, k7_,
  // and returns the scaled error norm.
  double attempt_step_(Rhs& f, double x, const std::vector<double>& y, double h) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                            a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

    for (std::size_t i = 0; i < n_; ++i) ytmp_[i] = y[i] + h * a21 * k1_[i];
    f(x + c2 * h, ytmp_, k2_);
    for (std::size_t i = 0; i < n_; ++i)
      ytmp_[i] = y[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
    f(x + c3 * h, ytmp_, k3_);
    for (std::size_t i = 0; i < n_; ++i)
      ytmp_[i] = y[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
    f(x + c4 * h, ytmp_, k4_);
    for (std::size_t i = 0; i < n_; ++i)
      ytmp_[i] = y[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
    f(x + c5 * h, ytmp_, k5_);
    for (std::size_t i = 0; i < n_; ++i)
      ytmp_[i] = y[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] +
                             a64 * k4_[i] + a65 * k5_[i]);
    f(x + h, ytmp_, k6_);
    for (std::size_t i = 0; i < n_; ++i)
      ynew_[i] = y[i] + h * (b1 * k1_[i] + b3 * k3_[i] + b4 * k4_[i] +
                             b5 * k5_[i] + b6 * k6_[i]);
    f(x + h, ynew_, k7_);

    double sum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double e = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] +
                      e6 * k6_[i] + e7 * k7_[i]);
      double sc = atol_ + rtol_ * std::max(std::fabs(y[i]), std::fabs(ynew_[i]));
      double q = e / sc;
      sum += q * q;
    }
    return std::sqrt(sum / static_cast<double>(n_));
  }

  double initial_step_(double x, const std::vector<double>& y, const OdeOptions& opt) {
    rtol_ = opt.rtol;
    atol_ = opt.atol;
    double ny = 0.0, nf = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double sc = atol_ + rtol_ * std::fabs(y[i]);
      double a = y[i] / sc, b = k1_[i] / sc;
      ny += a * a;
      nf += b * b;
    }
    ny = std::sqrt(ny / static_cast<double>(n_));
    nf = std::sqrt(nf / static_cast<double>(n_));
    double h = (nf > 1e-10) ? 0.01 * ny / nf : 1e-6;
    h = std::max(h, 1e2 * min_step_(x));
    return std::max(h, 1e-8);
  }

  static double snap_(double x) {
    return 1e-12 * std::max(1.0, std::fabs(x));
  }
  static double min_step_(double x) {
    return 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(x));
  }

  std::size_t n_;
  std::size_t n_steps_ = 0, n_rejected_ = 0;
  double rtol_ = 1e-10, atol_ = 1e-10;
  std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, yerr_, ynew_;
};

// Convenience wrapper for one-off integrations.
template <class Rhs>
void integrate_ode(Rhs&& f, double x0, double x1, std::vector<double>& y,
                   const OdeOptions& opt = {}) {
  Dopri5<std::remove_reference_t<Rhs>> solver(y.size());
  solver.integrate(f, x0, x1, y, opt);
}

// Uniform grid of n points covering [x0, x1] inclusive.
inline std::vector<double> uniform_grid(double x0, double x1, std::size_t n) {
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = x1;
    return g;
  }
  double dx = (x1 - x0) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = x0 + dx * static_cast<double>(i);
  g.back() = x1;
  return g;
}

} // namespace emband
