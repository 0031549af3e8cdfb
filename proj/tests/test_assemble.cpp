#include "emband/assemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "emband/floquet.hpp"
#include "emband/schedule.hpp"

using namespace emband;

namespace {

FloquetData free_frame(double e) {
  return floquet_solution(PeriodicPotential::zero(), e);
}

// Index of x in tr.grid (exact sample match expected).
std::size_t grid_index(const PruferTrajectory& tr, double x) {
  auto it = std::lower_bound(tr.grid.begin(), tr.grid.end(), x - 1e-9);
  REQUIRE(it != tr.grid.end());
  REQUIRE(*it == doctest::Approx(x).epsilon(1e-12));
  return static_cast<std::size_t>(std::distance(tr.grid.begin(), it));
}

}  // namespace

TEST_CASE("single eigenvalue, three epochs: decay, contract, support") {
  SchedulePolicy pol;
  pol.epochs = 3;
  pol.t0 = 200;
  auto s = build_schedule({1.0}, {0.3}, GrowthMode::finite, pol);
  REQUIRE(s.j == std::vector<std::int64_t>({200, 1800, 14600, 117000}));

  std::vector<FloquetData> fds = {free_frame(1.0)};
  AssembleOptions opt;
  opt.ode_tol = 1e-9;
  auto a = assemble(s, fds, opt);

  CHECK(a.contract_pass);
  REQUIRE(a.epochs.size() == 4);
  REQUIRE(a.contract.size() == 3);
  for (const auto& c : a.contract) {
    CHECK(c.activated);
    CHECK(c.bound == doctest::Approx(0.03125));
    CHECK(c.measured < c.bound);
    // At E = 1 over a zero background the per-epoch ratio is the exact power
    // law ((1+J_w)/(1+J_{w-1}))^{-2} up to the mollified ends and the O(1/d)
    // phase bias.
    double pred = std::pow(
        double(1 + s.j[size_t(c.w)]) / double(1 + s.j[size_t(c.w) - 1]), -2.0);
    CHECK(c.measured == doctest::Approx(pred).epsilon(0.15));
  }

  // ln R strictly decreasing at epoch boundaries, nonincreasing everywhere
  // (the owner's log-amplitude integrand is exactly nonpositive).
  const auto& tr = a.trajectories[0];
  for (std::size_t i = 1; i < tr.ln_r.size(); ++i)
    CHECK(tr.ln_r[i] <= tr.ln_r[i - 1] + 1e-12);
  for (int w = 1; w <= 3; ++w)
    CHECK(a.epochs[size_t(w)].ln_r[0] < a.epochs[size_t(w) - 1].ln_r[0] - 1.0);

  // Silent prefix and compact support.
  CHECK(a.potential(0.0) == 0.0);
  CHECK(a.potential(100.0) == 0.0);
  CHECK(a.potential(200.0) == 0.0);
  CHECK(a.potential(117000.0) == 0.0);
  CHECK(a.potential(2.0e5) == 0.0);
  CHECK(a.potential(1800.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(a.potential.silent_end() == 200.0);
  CHECK(a.potential.support_end() == 117000.0);
  CHECK(a.potential.stages().size() == 3);

  // Envelope: b = 0 in every slot, so |V|(1+x) <= c with near-saturation.
  CHECK(a.envelope_sup <= s.stage_coupling * (1 + 1e-9));
  CHECK(a.envelope_sup > 0.9 * s.stage_coupling);
  for (int w = 1; w <= 3; ++w)
    CHECK(a.epochs[size_t(w)].envelope_norm <= 100.0);

  auto l2 = verify_l2(a);
  CHECK(l2.pass);
  int asserted = 0;
  for (const auto& t : l2.tails) {
    if (t.w >= 2) {
      CHECK(t.ratio < 0.1);
      CHECK(t.asserted);
      ++asserted;
    }
  }
  CHECK(asserted == 2);
}

TEST_CASE("two eigenvalues over a cosine background: staggered activation") {
  auto v0 = PeriodicPotential::cosine(0.8);
  auto bs = locate_bands(v0, -1.0, 12.0);
  REQUIRE(!bs.bands.empty());
  // Slow-rotation interior points of the lowest band: the schedule's default
  // coupling buys amplitude order 2 only for harmonic rotation scale <= 1.
  double e0 = 0.25, e1 = 0.81;
  REQUIRE(bs.bands[0].lo < e0);
  REQUIRE(e1 < bs.bands[0].hi);

  SchedulePolicy pol;
  pol.epochs = 3;
  pol.t0 = 100;
  auto s = build_schedule({e0, e1}, {0.4, 1.1}, GrowthMode::finite, pol);
  REQUIRE(s.j == std::vector<std::int64_t>({100, 900, 13700, 116100}));
  REQUIRE(s.n == std::vector<std::int64_t>({1, 1, 2, 2}));

  std::vector<FloquetData> fds = {floquet_solution(v0, e0),
                                  floquet_solution(v0, e1)};
  // Healthy margins from every phase-locking configuration, not just the
  // hard rejection tolerance.
  constexpr double pi = 3.141592653589793;
  REQUIRE(std::abs(fds[0].k + fds[1].k - pi) > 0.05);
  REQUIRE(std::abs(fds[1].k - fds[0].k) > 0.05);
  REQUIRE(std::abs(fds[0].k - pi / 2) > 0.05);
  REQUIRE(std::abs(fds[1].k - pi / 2) > 0.05);

  AssembleOptions opt;
  opt.ode_tol = 1e-9;
  auto a = assemble(s, fds, opt);

  CHECK(a.contract_pass);
  REQUIRE(a.contract.size() == 6);
  for (const auto& c : a.contract) {
    if (c.eig == 1 && c.w == 1) {
      CHECK_FALSE(c.activated);
      CHECK(c.bound == doctest::Approx(2.0));  // pre-activation growth cap
      CHECK(c.measured < 1.6);
    } else {
      CHECK(c.activated);
      CHECK(c.measured < c.bound);
    }
  }
  CHECK(s.activation_epoch(0) == 1);
  CHECK(s.activation_epoch(1) == 2);

  // Epoch records agree with the trajectories at the epoch boundaries.
  for (int w = 0; w <= 3; ++w) {
    const auto& rec = a.epochs[size_t(w)];
    for (int j = 0; j < 2; ++j) {
      auto i = grid_index(a.trajectories[size_t(j)],
                          static_cast<double>(rec.x_end));
      CHECK(a.trajectories[size_t(j)].ln_r[i] ==
            doctest::Approx(rec.ln_r[size_t(j)]).epsilon(1e-10));
    }
  }

  // Staggered slots (b > 0) start at (1+x0)/(1+x0-b) = 1 + t T_w / (1+J_{w-1}),
  // so the global weighted envelope reaches ~c^2; N c^2 normalizes it to O(1).
  CHECK(a.envelope_sup > s.stage_coupling);
  CHECK(a.envelope_sup < 1.05 * s.stage_coupling * s.stage_coupling);
  for (int w = 1; w <= 3; ++w)
    CHECK(a.epochs[size_t(w)].envelope_norm <= 1.0);

  // Potential agrees with the drive phase recorded in the trajectories.
  const auto& stages = a.potential.stages();
  REQUIRE(stages.size() == 5);  // 1 + 2 + 2 slots
  for (const auto& st : stages) {
    std::size_t t = (std::abs(st.e_target - e0) < 1e-12) ? 0 : 1;
    const auto& tr = a.trajectories[t];
    double xm = 0.5 * (st.x0 + st.x1);
    auto it = std::lower_bound(tr.grid.begin(), tr.grid.end(), xm);
    REQUIRE(it != tr.grid.end());
    auto im = static_cast<std::size_t>(std::distance(tr.grid.begin(), it));
    double x = tr.grid[im];
    double expected = -st.c * stage_cutoff(x, st.x0, st.x1, st.width()) *
                      std::sin(2 * tr.theta[im]) / (1 + x - st.b);
    CHECK(a.potential(x) == doctest::Approx(expected).epsilon(1e-6));
  }

  // eval_sorted matches pointwise evaluation across slot boundaries.
  std::vector<double> xs;
  for (double x = 0; x <= 120000.0; x += 1337.0) xs.push_back(x);
  auto vals = a.potential.eval_sorted(xs);
  for (std::size_t i = 0; i < xs.size(); ++i)
    CHECK(vals[i] == doctest::Approx(a.potential(xs[i])).epsilon(1e-8));

  auto l2 = verify_l2(a);
  CHECK(l2.pass);
  for (const auto& t : l2.tails)
    if (t.asserted) CHECK(t.ratio <= 0.5);
}

TEST_CASE("slow-growth mode keeps the weighted envelope under its budget") {
  SchedulePolicy pol;
  pol.epochs = 4;
  auto h = [](double x) { return std::log(2.0 + x); };
  auto s = build_schedule({0.64, 2.89, 6.76}, {0.2, 0.7, 1.3},
                          GrowthMode::infinite, pol, h);
  REQUIRE(s.j == std::vector<std::int64_t>({1000, 3000, 7000, 23000, 55000}));
  REQUIRE(s.c == std::vector<std::int64_t>({1, 2, 2, 2, 2}));

  std::vector<FloquetData> fds = {free_frame(0.64), free_frame(2.89),
                                  free_frame(6.76)};
  AssembleOptions opt;
  opt.ode_tol = 1e-9;
  auto a = assemble(s, fds, opt);

  CHECK(a.contract_pass);
  CHECK(a.envelope_h_sup > 0.0);
  CHECK(a.envelope_h_sup <= 1.0);
  for (int w = 1; w <= 4; ++w) CHECK(a.epochs[size_t(w)].envelope_h_sup <= 1.0);

  // Third eigenvalue never owns a slot in four epochs: growth caps only.
  for (const auto& c : a.contract)
    if (c.eig == 2) {
      CHECK_FALSE(c.activated);
      CHECK(c.measured < 1.5);
    }

  // Borderline decay: the squared-amplitude table is informational here.
  auto l2 = verify_l2(a);
  CHECK(l2.pass);
  for (const auto& t : l2.tails) CHECK_FALSE(t.asserted);
}

TEST_CASE("squared-amplitude check rejects a non-decaying assembly") {
  SchedulePolicy pol;
  pol.epochs = 3;
  pol.t0 = 200;
  Assembly a;
  a.schedule = build_schedule({1.0}, {0.3}, GrowthMode::finite, pol);
  for (int w = 0; w <= 3; ++w) {
    EpochRecord rec;
    rec.w = w;
    rec.x_begin = w ? a.schedule.j[size_t(w) - 1] : 0;
    rec.x_end = a.schedule.j[size_t(w)];
    rec.ln_r = {0.0};  // amplitude never decays
    rec.q = {static_cast<double>(rec.x_end)};
    a.epochs.push_back(rec);
  }
  auto l2 = verify_l2(a);
  CHECK_FALSE(l2.pass);
  int failing = 0;
  for (const auto& t : l2.tails)
    if (t.asserted && !t.pass) {
      CHECK(t.ratio == doctest::Approx(8.0));
      CHECK(t.theta == doctest::Approx(-1.0));
      ++failing;
    }
  CHECK(failing == 2);
}

TEST_CASE("assembly rejects mismatched or fast-rotating frames") {
  SchedulePolicy pol;
  pol.epochs = 1;
  pol.t0 = 100;
  auto s = build_schedule({1.0}, {0.3}, GrowthMode::finite, pol);
  std::vector<FloquetData> wrong = {free_frame(1.21)};
  CHECK_THROWS_AS(assemble(s, wrong), StageError);
  CHECK_THROWS_AS(assemble(s, {}), StageError);

  // k = 2.6 needs coupling 4 * 2 * 2.6 > 8: rejected before integrating.
  auto fast = build_schedule({6.76}, {0.3}, GrowthMode::finite, pol);
  std::vector<FloquetData> fast_fd = {free_frame(6.76)};
  CHECK_THROWS_WITH_AS(assemble(fast, fast_fd),
                       doctest::Contains("harmonic scale"), StageError);
}
