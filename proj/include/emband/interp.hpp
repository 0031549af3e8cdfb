#pragma once

// Interpolation of 1-periodic tables on uniform grids (cubic Lagrange,
// fourth-order accurate). Used for the periodic factors attached to a
// Bloch solution: |phi|^2, the reduced phase, and the periodic part itself.

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace emband {

template <class T>
class PeriodicTable {
 public:
  PeriodicTable() = default;

  // samples[j] = f(j / samples.size()) for a 1-periodic f.
  explicit PeriodicTable(std::vector<T> samples) : s_(std::move(samples)) {
    if (s_.size() < 4) throw std::invalid_argument("periodic table needs >= 4 samples");
  }

  std::size_t size() const { return s_.size(); }
  const std::vector<T>& samples() const { return s_; }

  T operator()(double x) const {
    const std::size_t n = s_.size();
    double t = (x - std::floor(x)) * static_cast<double>(n);
    std::size_t j = static_cast<std::size_t>(t);
    if (j >= n) j = n - 1;
    double s = t - static_cast<double>(j);

    const T& fm1 = s_[(j + n - 1) % n];
    const T& f0 = s_[j];
    const T& f1 = s_[(j + 1) % n];
    const T& f2 = s_[(j + 2) % n];

    double wm1 = -s * (s - 1.0) * (s - 2.0) / 6.0;
    double w0 = (s * s - 1.0) * (s - 2.0) / 2.0;
    double w1 = -s * (s + 1.0) * (s - 2.0) / 2.0;
    double w2 = s * (s * s - 1.0) / 6.0;
    return fm1 * wm1 + f0 * w0 + f1 * w1 + f2 * w2;
  }

 private:
  std::vector<T> s_;
};

using PeriodicTableD = PeriodicTable<double>;
using PeriodicTableC = PeriodicTable<std::complex<double>>;

// Least-squares line fit y ~ a + b*x; returns {intercept, slope}.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line needs two equal-length series");
  double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  if (denom == 0) throw std::invalid_argument("degenerate abscissae in fit_line");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

} // namespace emband
