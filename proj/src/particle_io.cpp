#include "overlapfmm/particle_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <string_view>

namespace overlapfmm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_field(std::string_view field, std::size_t line, const char* name) {
  field = trim(field);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(line, std::string("cannot parse ") + name + " from '" + std::string(field) + "'");
  }
  if (!std::isfinite(value)) throw ParseError(line, std::string(name) + " is not finite");
  return value;
}

}  // namespace

std::vector<Particle> read_particles(std::istream& in) {
  std::vector<Particle> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view row = trim(raw);
    if (row.empty() || row.front() == '#') continue;
    const auto c1 = row.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos) {
      throw ParseError(line, "expected three comma-separated fields x,y,gamma");
    }
    const double x = parse_field(row.substr(0, c1), line, "x");
    const double y = parse_field(row.substr(c1 + 1, c2 - c1 - 1), line, "y");
    const double g = parse_field(row.substr(c2 + 1), line, "gamma");
    out.push_back({Complex{x, y}, g});
  }
  return out;
}

void write_velocities(std::ostream& out, std::span<const Velocity> velocities) {
  char buf[96];
  for (std::size_t i = 0; i < velocities.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, velocities[i].u, velocities[i].v);
    out << buf;
  }
}

std::vector<Particle> lattice_particles(int levels, int per_box) {
  if (levels < 0 || levels > 15) throw std::invalid_argument("lattice_particles: levels out of range");
  if (per_box < 1) throw std::invalid_argument("lattice_particles: per_box must be >= 1");
  const int side = 1 << levels;
  const double width = std::ldexp(1.0, -levels);
  const int sub = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(per_box))));
  std::vector<Particle> out;
  out.reserve(static_cast<std::size_t>(side) * side * per_box);
  for (int j = 0; j < side; ++j) {
    for (int i = 0; i < side; ++i) {
      for (int k = 0; k < per_box; ++k) {
        const double x = (i + (k % sub + 0.5) / sub) * width;
        const double y = (j + (k / sub + 0.5) / sub) * width;
        const double gamma = std::sin(2.0 * std::numbers::pi * (x + 2.0 * y)) + 0.5 * std::cos(6.0 * x * y);
        out.push_back({Complex{x, y}, gamma});
      }
    }
  }
  return out;
}

std::vector<Particle> random_particles(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> strength(-1.0, 1.0);
  std::vector<Particle> out(n);
  for (auto& p : out) {
    // Guard the half-open upper edge against generate_canonical rounding up to 1.
    const double x = std::min(unit(rng), std::nextafter(1.0, 0.0));
    const double y = std::min(unit(rng), std::nextafter(1.0, 0.0));
    p.position = Complex{x, y};
    p.circulation = strength(rng);
  }
  return out;
}

}  // namespace overlapfmm
