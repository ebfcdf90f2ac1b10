#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "overlapfmm/costmodel.hpp"

using namespace overlapfmm;
using doctest::Approx;

namespace {

const CostCoefficients k15 = coefficients(15, MachineModel{});

}  // namespace

TEST_CASE("coefficients at t = 15") {
  CHECK(k15.a == 225.0);
  CHECK(k15.b == Approx(42613.0));
  CHECK(k15.c == Approx(189308.0 / 3.0));
  CHECK(k15.c == Approx(63102.67).epsilon(1e-7));
  CHECK(k15.d == 198.0);
  CHECK(k15.b / k15.d == Approx(215.22).epsilon(0.01 / 215.22));
  CHECK(std::fabs(k15.b / k15.d - 215.2171717) < 1e-6);
}

TEST_CASE("coefficients scale with 1/r") {
  const CostCoefficients k = coefficients(15, MachineModel{2.0e9, 64});
  CHECK(k.a == Approx(225.0 / 2.0e9));
  CHECK(k.b == Approx(42613.0 / 2.0e9));
  CHECK(k.d == Approx(198.0 / 2.0e9));
  CHECK(k.b / k.d == Approx(k15.b / k15.d));
  CHECK_THROWS_AS(coefficients(0, MachineModel{}), std::invalid_argument);
  CHECK_THROWS_AS(coefficients(15, MachineModel{0.0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(coefficients(15, MachineModel{1.0, 0}), std::invalid_argument);
}

TEST_CASE("total_time") {
  CHECK(total_time(1000, 1, 10, k15) == Approx(225.0 * 1000 + k15.c * 100 + 198.0 * 10000));
  const double n = 1e6, p = 256, b = 20;
  const double hand = k15.a * n / p + k15.b * 4.0 + k15.c * n / (b * p) + k15.d * n * b / p;
  CHECK(total_time(n, p, b, k15) == Approx(hand));
  CHECK_THROWS_AS(total_time(0, 1, 1, k15), std::invalid_argument);
  CHECK_THROWS_AS(total_time(1, 0.5, 1, k15), std::invalid_argument);
}

TEST_CASE("optimal_B minimizes total_time") {
  const double bopt = optimal_B(k15);
  CHECK(bopt == Approx(17.85).epsilon(0.001));
  CHECK(std::lround(bopt) == 18);
  for (const double n : {1e4, 1e6}) {
    for (const double p : {1.0, 64.0, 4096.0}) {
      const double best = total_time(n, p, bopt, k15);
      for (double b = 0.5; b <= 200.0; b *= 1.07) CHECK(best <= total_time(n, p, b, k15) * (1 + 1e-14));
    }
  }
  CHECK(optimal_B(3.0, 3.0) == 1.0);
  CHECK(optimal_B(25.0 * 225.0, 9.0) == Approx(25.0));
  CHECK_THROWS_AS(optimal_B(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("min_B_cover") {
  CHECK(min_B_cover(1e6, 1e4, log4(1e4), k15) == Approx(14.30).epsilon(0.005 / 14.30));
  CHECK(min_B_cover(1e6, 1e4, k15) == min_B_cover(1e6, 1e4, log4(1e4), k15));
  CHECK(min_B_cover(1e6, 1, k15) == 0.0);
  CHECK(min_B_cover(2e6, 1e4, k15) == Approx(min_B_cover(1e6, 1e4, k15) / 2));
  CHECK(min_B_cover(1e6, 1e4, 3.0, k15) == Approx(k15.b / k15.d * 1e4 * 3.0 / 1e6));
}

TEST_CASE("min_particles_per_process") {
  CHECK(min_particles_per_process(4, 18, k15) == Approx(k15.b / k15.d / 18));
  CHECK(k15.b / k15.d / 18 == Approx(11.96).epsilon(0.001));
  const double at_2_20 = min_particles_per_process(std::ldexp(1.0, 20), 18, k15);
  CHECK(at_2_20 == Approx(119.57).epsilon(1e-3));
  CHECK(at_2_20 <= 120.0);
  CHECK(min_particles_per_process(1, 18, k15) == 0.0);
  // Consistent with min_B_cover: N/P = M exactly at B = min_B_cover.
  const double p = 1024, m = min_particles_per_process(p, 18, k15);
  CHECK(min_B_cover(m * p, p, k15) == Approx(18.0));
}

TEST_CASE("work formulas") {
  CHECK(work_init(1000, 15) == 123002.0);
  CHECK(work_init(0, 4) == 2.0);
  CHECK(work_direct(2, 10) == 216480.0);
  CHECK(work_direct(2, 10) == 22.0 * 9840.0);
  CHECK(work_m2l(2, 1) == 8208.0);
  CHECK(work_m2l(3, 1) == 80.0 * 27 * 19);
  CHECK(m2m_cell_work(15) == 4.0 * (2 + 450 + 840));
  CHECK(work_up(2, 15) == 0.0);
  CHECK(work_up(4, 15) == m2m_cell_work(15) * (16 + 64));
  CHECK(work_l2l(3, 2) == 64.0 * 4 * (2 + 8 + 32));
  CHECK_THROWS_AS(work_l2l(2, 15), std::invalid_argument);
  CHECK_THROWS_AS(work_direct(1, 10), std::invalid_argument);
  CHECK_THROWS_AS(work_init(-1, 15), std::invalid_argument);
}

TEST_CASE("the three forms of the direct work agree") {
  for (int levels = 2; levels <= 10; ++levels) {
    for (int b = 1; b <= 64; ++b) {
      const double n = std::ldexp(1.0, 2 * levels) * b;
      CHECK(work_direct_collected(levels, b) == work_direct(levels, b));
      CHECK(work_direct_in_n(n, b) == Approx(work_direct(levels, b)).epsilon(1e-12));
    }
  }
}

TEST_CASE("parallel up-sweep decomposition") {
  // For P = 4^k with 1 <= k <= L - 1 and 4^L = N/B the critical path is
  // c1 (N/(3BP) + log4 P - 7/3).
  const int t = 15;
  const double c1 = m2m_cell_work(t);
  for (int levels = 3; levels <= 12; ++levels) {
    const double cells = std::ldexp(1.0, 2 * levels);
    for (int k = 1; k <= levels - 1; ++k) {
      const double p = std::ldexp(1.0, 2 * k);
      CHECK(parallel_up_work(levels, t, p) == Approx(c1 * (cells / (3 * p) + k - 7.0 / 3.0)).epsilon(1e-13));
    }
  }
  // Past the tree depth each level costs one cell-step: slope c1 per log4 P.
  CHECK(parallel_up_work(6, t, std::ldexp(1.0, 20)) == c1 * 4);
  CHECK(parallel_up_work(6, t, 1) == work_up(6, t));
}

TEST_CASE("timeline_simulate on one process") {
  for (const auto mode : {ExecutionMode::sequential, ExecutionMode::overlapped}) {
    const TimelineReport r = timeline_simulate(1e5, 1, 18, 15, MachineModel{}, mode);
    CHECK(r.makespan == Approx(total_time(1e5, 1, 18, k15)));
    CHECK(r.utilization == Approx(1.0));
    CHECK(r.idle.total() == 0.0);
    CHECK(r.bottleneck_covered);
  }
}

TEST_CASE("timeline_simulate sequential makespan equals total_time") {
  for (const double p : {4.0, 256.0, 1e4}) {
    const TimelineReport r = timeline_simulate(1e6, p, 18, 15, MachineModel{}, ExecutionMode::sequential);
    CHECK(r.makespan == Approx(total_time(1e6, p, 18, k15)));
    CHECK_FALSE(r.bottleneck_covered);
    CHECK(r.idle_to_cover == Approx((p - 1) * k15.b * log4(p)));
  }
}

TEST_CASE("timeline_simulate: overlap never hurts and its verdict matches the closed form") {
  for (int k = 1; k <= 10; ++k) {
    const double p = std::ldexp(1.0, 2 * k);
    for (int b = 2; b <= 40; ++b) {
      const double n = 1e6;
      const auto seq = timeline_simulate(n, p, b, 15, MachineModel{}, ExecutionMode::sequential);
      const auto ovl = timeline_simulate(n, p, b, 15, MachineModel{}, ExecutionMode::overlapped);
      CHECK(ovl.makespan <= seq.makespan);
      CHECK(ovl.busy == Approx(seq.busy));
      CHECK(ovl.direct_in_idle <= ovl.idle_to_cover * (1 + 1e-12));
      CHECK(ovl.bottleneck_covered == (b >= min_B_cover(n, p, k15)));
      if (ovl.bottleneck_covered) CHECK(ovl.idle.coarse_sweep == Approx(0.0));
    }
  }
}

TEST_CASE("timeline_simulate example: N = 1e6, P = 1e4, B = 18 is covered") {
  const auto r = timeline_simulate(1e6, 1e4, 18, 15, MachineModel{}, ExecutionMode::overlapped);
  CHECK(r.bottleneck_covered);
  const auto r14 = timeline_simulate(1e6, 1e4, 14, 15, MachineModel{}, ExecutionMode::overlapped);
  CHECK_FALSE(r14.bottleneck_covered);
}

TEST_CASE("sweep_min_size") {
  const auto ps = powers_of_four(4, std::ldexp(1.0, 20));
  REQUIRE(ps.size() == 10);
  CHECK(ps.front() == 4.0);
  CHECK(ps.back() == std::ldexp(1.0, 20));
  const auto curve = sweep_min_size(ps, 18, 15);
  REQUIRE(curve.size() == ps.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(curve[i].processes == ps[i]);
    CHECK(curve[i].min_particles_per_process == Approx((i + 1) * k15.b / k15.d / 18));
    if (i > 0) CHECK(curve[i].min_particles_per_process > curve[i - 1].min_particles_per_process);
  }
  CHECK_THROWS_AS(powers_of_four(0, 4), std::invalid_argument);
  CHECK(powers_of_four(2, 3).empty());
}

TEST_CASE("execution mode names") {
  CHECK(parse_execution_mode("overlapped") == ExecutionMode::overlapped);
  CHECK(to_string(ExecutionMode::sequential) == "sequential");
  CHECK_THROWS_AS(parse_execution_mode("parallel"), std::invalid_argument);
}
