#include "overlapfmm/kernel.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

namespace overlapfmm {

namespace {

constexpr double kInvTwoPi = 0.5 * std::numbers::inv_pi;

// Below this, 1 - exp(-q) loses digits; use q (1 - q/2) instead.
constexpr double kSeriesCutoff = 1e-8;

void merge_sources(const NeighborLists& neighbors, std::size_t key, std::vector<std::size_t>& sources) {
  sources.assign(neighbors[key].begin(), neighbors[key].end());
  sources.insert(std::lower_bound(sources.begin(), sources.end(), key), key);
}

}  // namespace

KernelParams::KernelParams(double sigma) : sigma_(sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("KernelParams: sigma must be positive and finite");
  }
}

double zeta(Complex x, Complex y, const KernelParams& params) {
  const double s2 = params.sigma() * params.sigma();
  return kInvTwoPi / s2 * std::exp(-std::norm(x - y) / (2.0 * s2));
}

Velocity biot_savart_regularized(Complex z, const KernelParams& params) {
  const double r2 = std::norm(z);
  if (r2 == 0.0) return {};
  const double two_s2 = 2.0 * params.sigma() * params.sigma();
  const double q = r2 / two_s2;
  // factor = (1 - exp(-q)) / |z|^2
  const double factor = q < kSeriesCutoff ? (1.0 - 0.5 * q) / two_s2 : -std::expm1(-q) / r2;
  const double scale = kInvTwoPi * factor;
  return {-z.imag() * scale, z.real() * scale};
}

Velocity biot_savart_farfield(Complex z) {
  const double r2 = std::norm(z);
  if (r2 == 0.0) throw SingularPointError("biot_savart_farfield: z = 0 is singular");
  const double scale = kInvTwoPi / r2;
  return {-z.imag() * scale, z.real() * scale};
}

std::vector<Velocity> direct_sum_all(std::span<const Particle> particles, const KernelParams& params) {
  std::vector<Velocity> out(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) {
    Velocity acc;
    for (std::size_t j = 0; j < particles.size(); ++j) {
      if (i == j) continue;
      acc += particles[j].circulation *
             biot_savart_regularized(particles[i].position - particles[j].position, params);
    }
    out[i] = acc;
  }
  return out;
}

std::uint64_t near_field_box(std::size_t key, const Binning& binning, const NeighborLists& neighbors,
                             std::span<const Particle> particles, const KernelParams& params,
                             std::span<Velocity> out) {
  std::vector<std::size_t> sources;
  merge_sources(neighbors, key, sources);
  std::uint64_t evaluations = 0;
  for (const std::size_t target : binning.box_particles[key]) {
    const Complex zt = particles[target].position;
    Velocity acc;
    for (const std::size_t src_box : sources) {
      for (const std::size_t s : binning.box_particles[src_box]) {
        if (s == target) continue;
        acc += particles[s].circulation * biot_savart_regularized(zt - particles[s].position, params);
        ++evaluations;
      }
    }
    out[target] = acc;
  }
  return evaluations;
}

NearFieldResult near_field_eval(const Quadtree& tree, const Binning& binning, const NeighborLists& neighbors,
                                std::span<const Particle> particles, const KernelParams& params) {
  if (neighbors.level != tree.levels()) {
    throw std::invalid_argument("near_field_eval: neighbor lists must be built on the finest level");
  }
  if (binning.particle_box.size() != particles.size()) {
    throw std::invalid_argument("near_field_eval: binning does not match the particle set");
  }
  NearFieldResult result;
  result.velocities.resize(particles.size());
  for (std::size_t key = 0; key < binning.box_particles.size(); ++key) {
    result.pair_evaluations += near_field_box(key, binning, neighbors, particles, params, result.velocities);
  }
  return result;
}

NearFieldResult near_field_eval(const Quadtree& tree, const Binning& binning,
                                std::span<const Particle> particles, const KernelParams& params) {
  return near_field_eval(tree, binning, neighbor_lists(tree, tree.levels()), particles, params);
}

}  // namespace overlapfmm
