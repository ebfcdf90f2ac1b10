#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "overlapfmm/quadtree.hpp"
#include "overlapfmm/types.hpp"

namespace overlapfmm {

/// Gaussian core radius sigma of the regularized kernel.
class KernelParams {
 public:
  explicit KernelParams(double sigma);
  double sigma() const { return sigma_; }

 private:
  double sigma_;
};

/// Flop convention for one regularized kernel evaluation: 6 per complex
/// multiplication, 9 per complex division, 1 per exponential.
inline constexpr std::uint64_t kFlopsPerKernelEval = 22;

/// Normalized Gaussian basis (1/(2 pi sigma^2)) exp(-|x-y|^2 / (2 sigma^2)).
double zeta(Complex x, Complex y, const KernelParams& params);

/// Velocity induced at offset z by a unit-circulation Gaussian vortex.
/// Exactly zero at z = 0.
Velocity biot_savart_regularized(Complex z, const KernelParams& params);

/// Point-vortex limit i / (2 pi conj(z)). Throws SingularPointError at z = 0.
Velocity biot_savart_farfield(Complex z);

/// O(N^2) reference: velocity[i] = sum_j circulation_j * K_sigma(z_i - z_j).
std::vector<Velocity> direct_sum_all(std::span<const Particle> particles, const KernelParams& params);

/// Near-field velocities for the particles of one finest box. Sources are the
/// box itself and its neighbors, visited in ascending key order; each target
/// accumulates privately, so every unordered pair is evaluated once per end.
/// Writes into out[p] for each particle p in the box and returns the number
/// of kernel evaluations performed (self pairs excluded).
std::uint64_t near_field_box(std::size_t key, const Binning& binning, const NeighborLists& neighbors,
                             std::span<const Particle> particles, const KernelParams& params,
                             std::span<Velocity> out);

struct NearFieldResult {
  std::vector<Velocity> velocities;
  std::uint64_t pair_evaluations = 0;

  std::uint64_t flops() const { return pair_evaluations * kFlopsPerKernelEval; }
};

NearFieldResult near_field_eval(const Quadtree& tree, const Binning& binning,
                                std::span<const Particle> particles, const KernelParams& params);

NearFieldResult near_field_eval(const Quadtree& tree, const Binning& binning, const NeighborLists& neighbors,
                                std::span<const Particle> particles, const KernelParams& params);

}  // namespace overlapfmm
