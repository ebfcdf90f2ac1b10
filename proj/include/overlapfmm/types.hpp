#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace overlapfmm {

using Complex = std::complex<double>;

/// A vortex particle: position in the unit square (as x + iy) and its circulation.
struct Particle {
  Complex position;
  double circulation = 0.0;

  friend bool operator==(const Particle&, const Particle&) = default;
};

/// Physical velocity (u, v). Kept distinct from Complex so the conjugated
/// series value w = u - iv produced by the expansions cannot leak out as a velocity.
struct Velocity {
  double u = 0.0;
  double v = 0.0;

  static Velocity from_complex(Complex z) { return {z.real(), z.imag()}; }
  Complex as_complex() const { return {u, v}; }
  double norm() const { return std::hypot(u, v); }

  Velocity& operator+=(const Velocity& o) {
    u += o.u;
    v += o.v;
    return *this;
  }
  friend Velocity operator+(Velocity a, const Velocity& b) { return a += b; }
  friend Velocity operator-(const Velocity& a, const Velocity& b) { return {a.u - b.u, a.v - b.v}; }
  friend Velocity operator-(const Velocity& a) { return {-a.u, -a.v}; }
  friend Velocity operator*(double s, const Velocity& a) { return {s * a.u, s * a.v}; }
  friend bool operator==(const Velocity&, const Velocity&) = default;
};

class OutOfDomainError : public std::domain_error {
 public:
  OutOfDomainError(std::size_t index, const std::string& what)
      : std::domain_error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Evaluation requested at a point where the kernel or series is singular.
class SingularPointError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A documented precondition of an operation does not hold (e.g. boxes not well separated).
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// An internal consistency check failed.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace overlapfmm
