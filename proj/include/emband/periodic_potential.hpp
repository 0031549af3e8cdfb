#pragma once

// 1-periodic background potentials for the continuous operator
// H u = -u'' + (V0 + V) u. Evaluation reduces the argument mod 1, so
// periodicity holds by construction.

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace emband {

enum class Smoothness { kContinuous, kPiecewiseContinuous };

struct PeriodicPotential {
  std::function<double(double)> unit;  // evaluated on [0, 1)
  Smoothness smoothness = Smoothness::kContinuous;
  std::string label = "zero";

  double operator()(double x) const {
    double t = x - std::floor(x);
    if (t >= 1.0) t = 0.0;
    return unit(t);
  }

  static PeriodicPotential zero() {
    PeriodicPotential p;
    p.unit = [](double) { return 0.0; };
    p.label = "zero";
    return p;
  }

  static PeriodicPotential cosine(double amp, int freq = 1) {
    PeriodicPotential p;
    p.unit = [amp, freq](double t) { return amp * std::cos(2.0 * M_PI * freq * t); };
    p.label = "cosine amp=" + std::to_string(amp) + " freq=" + std::to_string(freq);
    return p;
  }

  // V0(t) = c0 + sum_m (cos_coef[m-1] cos(2 pi m t) + sin_coef[m-1] sin(2 pi m t))
  static PeriodicPotential fourier(double c0, std::vector<double> cos_coef,
                                   std::vector<double> sin_coef) {
    PeriodicPotential p;
    p.unit = [c0, cos_coef = std::move(cos_coef),
              sin_coef = std::move(sin_coef)](double t) {
      double v = c0;
      for (std::size_t m = 0; m < cos_coef.size(); ++m)
        v += cos_coef[m] * std::cos(2.0 * M_PI * (m + 1) * t);
      for (std::size_t m = 0; m < sin_coef.size(); ++m)
        v += sin_coef[m] * std::sin(2.0 * M_PI * (m + 1) * t);
      return v;
    };
    p.label = "fourier";
    return p;
  }
};

} // namespace emband
