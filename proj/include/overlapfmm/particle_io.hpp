#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "overlapfmm/types.hpp"

namespace overlapfmm {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Rows "x,y,gamma"; blank lines and lines starting with '#' are skipped.
std::vector<Particle> read_particles(std::istream& in);

/// Rows "index,u,v" at full double precision.
void write_velocities(std::ostream& out, std::span<const Velocity> velocities);

/// Exactly B particles per finest box of a 2^L x 2^L grid, laid out on a
/// ceil(sqrt(B))^2 sub-lattice inside each box, with smooth deterministic
/// circulations. Returns 4^L * B particles.
std::vector<Particle> lattice_particles(int levels, int per_box);

/// N uniform positions in [0,1)^2 and circulations uniform in [-1, 1).
std::vector<Particle> random_particles(std::size_t n, std::uint64_t seed);

}  // namespace overlapfmm
