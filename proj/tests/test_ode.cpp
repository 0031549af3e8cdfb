#include "doctest.h"

#include <cmath>
#include <vector>

#include "emband/interp.hpp"
#include "emband/ode.hpp"

using namespace emband;

namespace {

// y'' = -y packed as (y, y'); exact solution cos/sin.
void harmonic(double, const std::vector<double>& y, std::vector<double>& dy) {
  dy[0] = y[1];
  dy[1] = -y[0];
}

} // namespace

TEST_CASE("dopri5 integrates harmonic oscillator over long range") {
  std::vector<double> y = {1.0, 0.0};
  auto rhs = harmonic;
  OdeOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-10;
  integrate_ode(rhs, 0.0, 200.0, y, opt);
  CHECK(std::fabs(y[0] - std::cos(200.0)) < 1e-7);
  CHECK(std::fabs(y[1] + std::sin(200.0)) < 1e-7);
}

TEST_CASE("dopri5 lands exactly on sample points") {
  std::vector<double> y = {0.0};
  auto rhs = [](double x, const std::vector<double>&, std::vector<double>& dy) {
    dy[0] = std::cos(x);
  };
  Dopri5<decltype(rhs)> solver(1);
  auto grid = uniform_grid(0.0, 30.0, 257);
  std::vector<double> xs, vals;
  OdeOptions opt;
  solver.integrate_sampled(rhs, 0.0, 30.0, y, opt, grid,
                           [&](double x, const std::vector<double>& s) {
                             xs.push_back(x);
                             vals.push_back(s[0]);
                           });
  REQUIRE(xs.size() == grid.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    worst = std::max(worst, std::fabs(vals[i] - std::sin(xs[i])));
  CHECK(worst < 1e-9);
  CHECK(xs.front() == doctest::Approx(0.0));
  CHECK(xs.back() == doctest::Approx(30.0));
}

TEST_CASE("dopri5 quadrature state matches closed form") {
  // Append a running integral as an extra state component.
  std::vector<double> y = {1.0, 0.0, 0.0};
  auto rhs = [](double, const std::vector<double>& y, std::vector<double>& dy) {
    dy[0] = y[1];
    dy[1] = -y[0];
    dy[2] = y[0] * y[0]; // integral of cos^2
  };
  OdeOptions opt;
  integrate_ode(rhs, 0.0, 50.0, y, opt);
  double exact = 25.0 + std::sin(100.0) / 4.0;
  CHECK(std::fabs(y[2] - exact) < 2e-7);
}

TEST_CASE("dopri5 rejects reversed ranges and bad dimensions") {
  std::vector<double> y = {1.0};
  auto rhs = [](double, const std::vector<double>&, std::vector<double>& dy) { dy[0] = 0.0; };
  CHECK_THROWS_AS(integrate_ode(rhs, 1.0, 0.0, y), OdeError);
  Dopri5<decltype(rhs)> solver(2);
  OdeOptions opt;
  CHECK_THROWS_AS(solver.integrate(rhs, 0.0, 1.0, y, opt), OdeError);
}

TEST_CASE("periodic cubic table reproduces smooth periodic functions") {
  const std::size_t n = 256;
  std::vector<double> samples(n);
  for (std::size_t j = 0; j < n; ++j) {
    double x = static_cast<double>(j) / n;
    samples[j] = std::sin(2 * M_PI * x) + 0.3 * std::cos(4 * M_PI * x);
  }
  PeriodicTableD tab(samples);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    double x = -3.0 + 0.0131 * i;
    double ref = std::sin(2 * M_PI * (x - std::floor(x))) +
                 0.3 * std::cos(4 * M_PI * (x - std::floor(x)));
    worst = std::max(worst, std::fabs(tab(x) - ref));
  }
  CHECK(worst < 1e-7);
  CHECK(tab(0.25) == doctest::Approx(tab(7.25)).epsilon(1e-14));
}

TEST_CASE("line fit recovers slope and intercept") {
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(0.1 * i);
    y.push_back(3.0 - 2.5 * 0.1 * i);
  }
  auto f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(-2.5).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(3.0).epsilon(1e-12));
}
