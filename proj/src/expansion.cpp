#include "overlapfmm/expansion.hpp"

#include <array>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace overlapfmm {

namespace {

constexpr int kBinomialRows = 2 * kMaxOrder + 1;

using BinomialTable = std::array<std::array<double, kBinomialRows>, kBinomialRows>;

BinomialTable make_binomials() {
  std::array<std::array<std::uint64_t, kBinomialRows>, kBinomialRows> exact{};
  for (int n = 0; n < kBinomialRows; ++n) {
    exact[n][0] = 1;
    for (int k = 1; k <= n; ++k) exact[n][k] = exact[n - 1][k - 1] + (k < n ? exact[n - 1][k] : 0);
  }
  BinomialTable out{};
  for (int n = 0; n < kBinomialRows; ++n)
    for (int k = 0; k <= n; ++k) out[n][k] = static_cast<double>(exact[n][k]);
  return out;
}

const BinomialTable& binomials() {
  static const BinomialTable table = make_binomials();
  return table;
}

void check_order(int order, const char* what) {
  if (order < 1 || order > kMaxOrder) {
    std::ostringstream msg;
    msg << what << ": order " << order << " outside [1, " << kMaxOrder << "]";
    throw std::invalid_argument(msg.str());
  }
}

void check_same_order(int a, int b, const char* what) {
  if (a != b) {
    std::ostringstream msg;
    msg << what << ": expansion orders differ (" << a << " vs " << b << ")";
    throw std::invalid_argument(msg.str());
  }
}

// Relative slack on the separation tests so exact lattice geometry is not
// rejected by rounding.
constexpr double kSeparationSlack = 1e-12;

constexpr std::uint64_t kComplexMul = 6;
constexpr std::uint64_t kComplexAdd = 2;

void tally(FlopTally* t, std::uint64_t n) {
  if (t) t->add(n);
}

}  // namespace

MultipoleExpansion::MultipoleExpansion(Complex c, int order, double w) : center(c), width(w) {
  check_order(order, "MultipoleExpansion");
  coeffs.assign(static_cast<std::size_t>(order), Complex{});
}

LocalExpansion::LocalExpansion(Complex c, int order) : center(c) {
  check_order(order, "LocalExpansion");
  coeffs.assign(static_cast<std::size_t>(order), Complex{});
}

double binomial(int n, int k) {
  if (n < 0 || n >= kBinomialRows || k < 0 || k > n) {
    throw std::out_of_range("binomial: arguments outside the precomputed table");
  }
  return binomials()[n][k];
}

void p2m_accumulate(std::span<const Particle> particles, std::span<const std::size_t> indices,
                    MultipoleExpansion& target, FlopTally* t) {
  const int order = target.order();
  const double scale = -0.5 * std::numbers::inv_pi;
  for (const std::size_t p : indices) {
    const Complex dz = particles[p].position - target.center;
    // -i Gamma / (2 pi), with 0^0 = 1 so a particle on the center only feeds a_0.
    const Complex q{0.0, scale * particles[p].circulation};
    Complex power{1.0, 0.0};
    for (int m = 0; m < order; ++m) {
      target.coeffs[m] += q * power;
      power *= dz;
    }
    // 2 for the offset, 1 for the strength, then one multiply-add per term.
    tally(t, 3 + (kComplexMul + kComplexAdd) * static_cast<std::uint64_t>(order));
  }
}

MultipoleExpansion p2m(std::span<const Particle> particles, Complex center, int order, double width,
                       FlopTally* t) {
  check_order(order, "p2m");
  if (width <= 0.0) {
    double r = 0.0;
    for (const auto& p : particles) r = std::max(r, std::abs(p.position - center));
    width = 2.0 * r;
  }
  MultipoleExpansion out(center, order, width);
  std::vector<std::size_t> all(particles.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  p2m_accumulate(particles, all, out, t);
  return out;
}

void m2m_accumulate(const MultipoleExpansion& child, MultipoleExpansion& parent, FlopTally* t) {
  check_same_order(child.order(), parent.order(), "m2m");
  const int order = child.order();
  const Complex shift = child.center - parent.center;
  std::vector<Complex> powers(static_cast<std::size_t>(order));
  powers[0] = 1.0;
  for (int k = 1; k < order; ++k) powers[k] = powers[k - 1] * shift;
  tally(t, kComplexMul * static_cast<std::uint64_t>(order - 1));
  for (int k = 0; k < order; ++k) {
    Complex acc{};
    for (int m = 0; m <= k; ++m) acc += child.coeffs[m] * (binomial(k, m) * powers[k - m]);
    parent.coeffs[k] += acc;
    // complex * (real * complex) and an add per term, plus the final add.
    tally(t, static_cast<std::uint64_t>(k + 1) * (kComplexMul + 2 + kComplexAdd) + kComplexAdd);
  }
}

MultipoleExpansion m2m(const MultipoleExpansion& child, Complex new_center, double new_width, FlopTally* t) {
  MultipoleExpansion out(new_center, child.order(), new_width > 0.0 ? new_width : 2.0 * child.width);
  m2m_accumulate(child, out, t);
  return out;
}

void m2l_accumulate(const MultipoleExpansion& source, LocalExpansion& target, FlopTally* t) {
  check_same_order(source.order(), target.order(), "m2l");
  const Complex d = target.center - source.center;
  const double dist = std::abs(d);
  if (dist == 0.0 || dist < 2.0 * source.width * (1.0 - kSeparationSlack)) {
    std::ostringstream msg;
    msg << "m2l: target center at distance " << dist << " is not well separated from a source of width "
        << source.width;
    throw PreconditionError(msg.str());
  }
  // b_l = (-1)^l d^-l sum_m C(l+m, m) a_m d^-(m+1)
  const int order = source.order();
  const Complex inv_d = 1.0 / d;
  std::vector<Complex> scaled(static_cast<std::size_t>(order));
  Complex inv_power = inv_d;
  for (int m = 0; m < order; ++m) {
    scaled[m] = source.coeffs[m] * inv_power;
    inv_power *= inv_d;
  }
  Complex outer{1.0, 0.0};
  for (int l = 0; l < order; ++l) {
    Complex acc{};
    for (int m = 0; m < order; ++m) acc += binomial(l + m, m) * scaled[m];
    target.coeffs[l] += ((l % 2) ? -1.0 : 1.0) * outer * acc;
    outer *= inv_d;
  }
  const auto n = static_cast<std::uint64_t>(order);
  tally(t, 9 + 2 * kComplexMul * n + n * n * (2 + kComplexAdd) + n * (kComplexMul + 2 + kComplexAdd));
}

LocalExpansion m2l(const MultipoleExpansion& source, Complex target_center, FlopTally* t) {
  LocalExpansion out(target_center, source.order());
  m2l_accumulate(source, out, t);
  return out;
}

void l2l_accumulate(const LocalExpansion& parent, LocalExpansion& child, FlopTally* t) {
  check_same_order(parent.order(), child.order(), "l2l");
  const int order = parent.order();
  const Complex shift = child.center - parent.center;
  std::vector<Complex> powers(static_cast<std::size_t>(order));
  powers[0] = 1.0;
  for (int k = 1; k < order; ++k) powers[k] = powers[k - 1] * shift;
  tally(t, kComplexMul * static_cast<std::uint64_t>(order - 1));
  for (int l = 0; l < order; ++l) {
    Complex acc{};
    for (int m = l; m < order; ++m) acc += parent.coeffs[m] * (binomial(m, l) * powers[m - l]);
    child.coeffs[l] += acc;
    tally(t, static_cast<std::uint64_t>(order - l) * (kComplexMul + 2 + kComplexAdd) + kComplexAdd);
  }
}

LocalExpansion l2l(const LocalExpansion& parent, Complex child_center, FlopTally* t) {
  LocalExpansion out(child_center, parent.order());
  l2l_accumulate(parent, out, t);
  return out;
}

Velocity l2p(const LocalExpansion& local, Complex position, FlopTally* t) {
  const Complex y = position - local.center;
  Complex w{};
  for (int l = local.order() - 1; l >= 0; --l) w = w * y + local.coeffs[l];
  tally(t, 2 + (kComplexMul + kComplexAdd) * static_cast<std::uint64_t>(local.order()));
  return Velocity::from_complex(std::conj(w));
}

Velocity m2p_eval(const MultipoleExpansion& multipole, Complex position) {
  const Complex y = position - multipole.center;
  const double r = std::abs(y);
  if (r == 0.0 || r <= multipole.width * std::numbers::sqrt2 / 2.0) {
    std::ostringstream msg;
    msg << "m2p_eval: position at distance " << r << " lies inside the source region of width "
        << multipole.width;
    throw PreconditionError(msg.str());
  }
  const Complex inv_y = 1.0 / y;
  // sum_m a_m y^-(m+1) = y^-1 (a_0 + y^-1 (a_1 + ...))
  Complex w{};
  for (int m = multipole.order() - 1; m >= 0; --m) w = (w + multipole.coeffs[m]) * inv_y;
  return Velocity::from_complex(std::conj(w));
}

}  // namespace overlapfmm
