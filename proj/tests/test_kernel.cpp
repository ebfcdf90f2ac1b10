#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "overlapfmm/kernel.hpp"
#include "overlapfmm/particle_io.hpp"

using namespace overlapfmm;

TEST_CASE("KernelParams validates sigma") {
  CHECK_THROWS_AS(KernelParams(0.0), std::invalid_argument);
  CHECK_THROWS_AS(KernelParams(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(KernelParams(std::numeric_limits<double>::infinity()), std::invalid_argument);
  CHECK(KernelParams(0.5).sigma() == 0.5);
}

TEST_CASE("zeta peak, symmetry and normalization") {
  const KernelParams unit(1.0);
  CHECK(zeta({0.3, 0.2}, {0.3, 0.2}, unit) == doctest::Approx(0.1591549430918953).epsilon(1e-15));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 100; ++i) {
    const Complex x{u(rng), u(rng)}, y{u(rng), u(rng)};
    CHECK(zeta(x, y, unit) == zeta(y, x, unit));
    CHECK(zeta(x, y, unit) > 0.0);
  }
  // Quadrature over the disk of radius 8 sigma.
  const double sigma = 0.03;
  const double integral = oracle::gaussian_disk_integral(sigma, 8 * sigma, 800);
  CHECK(std::abs(integral - 1.0) <= 1e-6);
  // The library value integrates the same way.
  const KernelParams p(sigma);
  const int cells = 800;
  const double h = 16 * sigma / cells;
  double sum = 0.0;
  for (int a = 0; a < cells; ++a)
    for (int b = 0; b < cells; ++b) {
      const Complex z{-8 * sigma + (a + 0.5) * h, -8 * sigma + (b + 0.5) * h};
      if (std::norm(z) <= 64 * sigma * sigma) sum += zeta(z, {0, 0}, p);
    }
  CHECK(std::abs(sum * h * h - 1.0) <= 1e-6);
}

TEST_CASE("regularized kernel values") {
  const KernelParams p(0.1);
  const Velocity k = biot_savart_regularized({1.0, 0.0}, p);
  CHECK(k.u == 0.0);
  CHECK(k.v == doctest::Approx((1.0 - std::exp(-50.0)) / (2 * oracle::kPi)).epsilon(1e-15));
  CHECK(k.v == doctest::Approx(0.1591549).epsilon(1e-7));
  CHECK(biot_savart_regularized({0.0, 0.0}, p) == Velocity{0.0, 0.0});

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 200; ++i) {
    const Complex z{u(rng), u(rng)};
    const Velocity a = biot_savart_regularized(z, p);
    const Velocity b = biot_savart_regularized(-z, p);
    CHECK(a.u == -b.u);
    CHECK(a.v == -b.v);
    const Velocity o = oracle::kernel_xy(z.real(), z.imag(), 0.1);
    CHECK(a.u == doctest::Approx(o.u).epsilon(1e-13));
    CHECK(a.v == doctest::Approx(o.v).epsilon(1e-13));
  }
}

TEST_CASE("regularized kernel near the origin uses the series limit") {
  const KernelParams p(1.0);
  // |K| ~ |z| / (4 pi sigma^2) as z -> 0.
  for (const double r : {1e-3, 1e-5, 1e-9, 1e-150}) {
    const Velocity k = biot_savart_regularized({r, 0.0}, p);
    CHECK(k.u == 0.0);
    CHECK(k.v == doctest::Approx(r / (4 * oracle::kPi)).epsilon(1e-6));
    CHECK(std::isfinite(k.v));
  }
}

TEST_CASE("far-field kernel") {
  const Velocity a = biot_savart_farfield({1.0, 0.0});
  CHECK(a.u == 0.0);
  CHECK(a.v == doctest::Approx(1 / (2 * oracle::kPi)).epsilon(1e-15));
  const Velocity b = biot_savart_farfield({0.0, 2.0});
  CHECK(b.u == doctest::Approx(-1 / (4 * oracle::kPi)).epsilon(1e-15));
  CHECK(b.v == 0.0);
  CHECK_THROWS_AS(biot_savart_farfield({0.0, 0.0}), SingularPointError);

  // i / (2 pi conj z)
  const Complex z{0.3, -0.7};
  const Complex analytic = Complex{0, 1} / (2 * oracle::kPi * std::conj(z));
  const Velocity c = biot_savart_farfield(z);
  CHECK(c.u == doctest::Approx(analytic.real()).epsilon(1e-14));
  CHECK(c.v == doctest::Approx(analytic.imag()).epsilon(1e-14));
}

TEST_CASE("regularized kernel converges to the far field") {
  const KernelParams p(0.05);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(0, 2 * oracle::kPi);
  for (int i = 0; i < 200; ++i) {
    const double r = 0.01 + 0.5 * (i / 200.0);
    const Complex z = std::polar(r, ang(rng));
    const Velocity k = biot_savart_regularized(z, p);
    const Velocity f = biot_savart_farfield(z);
    const double rel = (k - f).norm() / f.norm();
    // The ratio is exactly exp(-|z|^2 / (2 sigma^2)) analytically; allow rounding.
    CHECK(rel <= std::exp(-r * r / (2 * 0.05 * 0.05)) * (1 + 1e-9) + 1e-15);
  }
  // |z| / sigma = 10
  const Complex z10{0.5, 0.0};
  const double rel = (biot_savart_regularized(z10, p) - biot_savart_farfield(z10)).norm() /
                     biot_savart_farfield(z10).norm();
  CHECK(rel <= std::exp(-50.0) + 1e-16);
}

TEST_CASE("direct_sum_all basics") {
  const KernelParams p(0.05);
  const std::vector<Particle> single{{{0.4, 0.4}, 3.0}};
  CHECK(direct_sum_all(single, p)[0] == Velocity{0.0, 0.0});

  // Opposite circulations symmetric about a point move together.
  const std::vector<Particle> pair{{{0.4, 0.5}, 1.0}, {{0.6, 0.5}, -1.0}};
  const auto v = direct_sum_all(pair, p);
  CHECK(v[0].u == doctest::Approx(v[1].u).epsilon(1e-15));
  CHECK(v[0].v == doctest::Approx(v[1].v).epsilon(1e-15));
  CHECK(v[0].norm() > 0.0);
}

TEST_CASE("direct_sum_all matches the independent double loop") {
  const auto ps = random_particles(100, 42);
  const auto v = direct_sum_all(ps, KernelParams(0.02));
  const auto o = oracle::direct_velocities(ps, 0.02);
  double worst = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) worst = std::max(worst, (v[i] - o[i]).norm() / o[i].norm());
  CHECK(worst <= 1e-13);
}

TEST_CASE("direct_sum_all is translation equivariant") {
  auto ps = random_particles(60, 9);
  for (auto& p : ps) p.position *= 0.5;
  const KernelParams k(0.03);
  const auto a = direct_sum_all(ps, k);
  for (auto& p : ps) p.position += Complex{0.37, 0.21};
  const auto b = direct_sum_all(ps, k);
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK((a[i] - b[i]).norm() <= 1e-12 * (1 + a[i].norm()));
}

TEST_CASE("near_field_eval with everything in one neighborhood equals the direct sum") {
  // Particles confined to one finest box at L = 2.
  auto ps = random_particles(40, 1);
  for (auto& p : ps) p.position = Complex{0.5, 0.5} + 0.2 * p.position;
  const Quadtree tree = build_tree(2);
  const Binning b = bin_particles(tree, ps);
  const KernelParams k(0.01);
  const NearFieldResult near = near_field_eval(tree, b, ps, k);
  const auto direct = direct_sum_all(ps, k);
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(near.velocities[i] == direct[i]);
  CHECK(near.pair_evaluations == 40 * 39);
  CHECK(near.flops() == 22 * 40 * 39);
}

TEST_CASE("near_field_eval with empty neighbors sees only its own box") {
  const Quadtree tree = build_tree(3);
  const std::vector<Particle> ps{{{0.01, 0.01}, 1.0}, {{0.02, 0.03}, -2.0}, {{0.9, 0.9}, 5.0}};
  const KernelParams k(0.01);
  const Binning b = bin_particles(tree, ps);
  const NearFieldResult near = near_field_eval(tree, b, ps, k);
  const std::vector<Particle> own{ps[0], ps[1]};
  const auto d = direct_sum_all(own, k);
  CHECK(near.velocities[0] == d[0]);
  CHECK(near.velocities[1] == d[1]);
  CHECK(near.velocities[2] == Velocity{0.0, 0.0});
  CHECK(near.pair_evaluations == 2);
}

TEST_CASE("near-field pair count is twice the unordered near pairs") {
  const Quadtree tree = build_tree(3);
  const auto ps = random_particles(300, 77);
  const Binning b = bin_particles(tree, ps);
  const NeighborLists nl = neighbor_lists(tree, 3);
  std::uint64_t unordered = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t j = i + 1; j < ps.size(); ++j) {
      const std::size_t bi = b.particle_box[i], bj = b.particle_box[j];
      const auto& n = nl[bi];
      if (bi == bj || std::find(n.begin(), n.end(), bj) != n.end()) ++unordered;
    }
  }
  const NearFieldResult near = near_field_eval(tree, b, ps, KernelParams(0.01));
  CHECK(near.pair_evaluations == 2 * unordered);
}
