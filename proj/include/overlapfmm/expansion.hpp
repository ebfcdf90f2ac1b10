#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "overlapfmm/types.hpp"

namespace overlapfmm {

/// Largest supported expansion order. Binomials up to C(2t, t) stay exact in 64 bits.
inline constexpr int kMaxOrder = 32;

/// Default expansion order.
inline constexpr int kDefaultOrder = 15;

/// Running flop tally using 6 flops per complex multiplication and 2 per
/// complex addition.
struct FlopTally {
  std::uint64_t flops = 0;
  void add(std::uint64_t n) { flops += n; }
};

/// f(z) = sum_m a_m / (z - center)^(m+1), m = 0..order-1.
///
/// The series represents w = u - iv of the induced velocity, so a single
/// particle contributes a_0 = -i Gamma / (2 pi). `width` is the side of the
/// square the sources lie in; it bounds where the series may be evaluated
/// and which boxes count as well separated.
struct MultipoleExpansion {
  Complex center;
  double width = 0.0;
  std::vector<Complex> coeffs;

  MultipoleExpansion() = default;
  MultipoleExpansion(Complex c, int order, double w = 0.0);
  int order() const { return static_cast<int>(coeffs.size()); }
};

/// g(z) = sum_l b_l (z - center)^l, l = 0..order-1.
struct LocalExpansion {
  Complex center;
  std::vector<Complex> coeffs;

  LocalExpansion() = default;
  LocalExpansion(Complex c, int order);
  int order() const { return static_cast<int>(coeffs.size()); }
};

/// C(n, k) for n <= 2 * kMaxOrder, computed in exact integer arithmetic.
double binomial(int n, int k);

/// Particle-to-multipole. When width is zero it defaults to twice the largest
/// particle offset from the center. An empty particle set yields zeros.
MultipoleExpansion p2m(std::span<const Particle> particles, Complex center, int order, double width = 0.0,
                       FlopTally* tally = nullptr);

/// Adds the selected particles into an existing expansion; counts 3 + 8t flops per particle.
void p2m_accumulate(std::span<const Particle> particles, std::span<const std::size_t> indices,
                    MultipoleExpansion& target, FlopTally* tally = nullptr);

/// Re-centers a multipole expansion. The shift is exact within the truncated family.
/// A zero new_width defaults to twice the child width.
MultipoleExpansion m2m(const MultipoleExpansion& child, Complex new_center, double new_width = 0.0,
                       FlopTally* tally = nullptr);
void m2m_accumulate(const MultipoleExpansion& child, MultipoleExpansion& parent, FlopTally* tally = nullptr);

/// Converts a multipole expansion into a local expansion about target_center.
/// Requires |target_center - source.center| >= 2 * source.width (and > 0);
/// throws PreconditionError otherwise.
LocalExpansion m2l(const MultipoleExpansion& source, Complex target_center, FlopTally* tally = nullptr);
void m2l_accumulate(const MultipoleExpansion& source, LocalExpansion& target, FlopTally* tally = nullptr);

/// Exact polynomial re-centering.
LocalExpansion l2l(const LocalExpansion& parent, Complex child_center, FlopTally* tally = nullptr);
void l2l_accumulate(const LocalExpansion& parent, LocalExpansion& child, FlopTally* tally = nullptr);

/// Evaluates g at position (Horner) and conjugates w = u - iv into a velocity.
Velocity l2p(const LocalExpansion& local, Complex position, FlopTally* tally = nullptr);

/// Direct multipole evaluation; test and diagnostics use only. Requires the
/// position to lie outside the disk circumscribing the source square; throws
/// PreconditionError otherwise.
Velocity m2p_eval(const MultipoleExpansion& multipole, Complex position);

}  // namespace overlapfmm
