#include "overlapfmm/quadtree.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace overlapfmm {

Quadtree::Quadtree(int levels) : levels_(levels) {
  if (levels < 2) {
    throw std::invalid_argument("Quadtree: levels must be >= 2 (got " + std::to_string(levels) + ")");
  }
  // 4^L boxes at the finest level; keep keys comfortably inside size_t and memory sane.
  if (levels > 15) {
    throw std::invalid_argument("Quadtree: levels must be <= 15 (got " + std::to_string(levels) + ")");
  }
  boxes_.resize(static_cast<std::size_t>(levels) + 1);
  for (int l = 0; l <= levels; ++l) {
    const int n = side(l);
    const double w = width(l);
    auto& row = boxes_[l];
    row.reserve(box_count(l));
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        row.push_back(Box{l, i, j, Complex{(i + 0.5) * w, (j + 0.5) * w}, w});
      }
    }
  }
}

std::size_t Quadtree::parent_key(int level, std::size_t key) {
  const auto n = static_cast<std::size_t>(side(level));
  const std::size_t i = key % n;
  const std::size_t j = key / n;
  return (j / 2) * (n / 2) + i / 2;
}

std::array<std::size_t, 4> Quadtree::child_keys(int level, std::size_t key) {
  const auto n = static_cast<std::size_t>(side(level));
  const std::size_t i = key % n;
  const std::size_t j = key / n;
  const std::size_t cn = 2 * n;
  return {(2 * j) * cn + 2 * i, (2 * j) * cn + 2 * i + 1, (2 * j + 1) * cn + 2 * i,
          (2 * j + 1) * cn + 2 * i + 1};
}

BoxClass Quadtree::classify(int level, std::size_t key) {
  const auto n = static_cast<std::size_t>(side(level));
  const std::size_t i = key % n;
  const std::size_t j = key / n;
  const int on_x = (i == 0 || i == n - 1) ? 1 : 0;
  const int on_y = (j == 0 || j == n - 1) ? 1 : 0;
  if (on_x + on_y == 2) return BoxClass::corner;
  if (on_x + on_y == 1) return BoxClass::edge;
  return BoxClass::interior;
}

Quadtree build_tree(int levels) { return Quadtree(levels); }

Binning bin_particles(const Quadtree& tree, std::span<const Particle> particles) {
  const int finest = tree.levels();
  const int n = Quadtree::side(finest);
  Binning out;
  out.box_particles.resize(Quadtree::box_count(finest));
  out.particle_box.resize(particles.size());
  for (std::size_t p = 0; p < particles.size(); ++p) {
    const double x = particles[p].position.real();
    const double y = particles[p].position.imag();
    if (!(x >= 0.0 && x < 1.0 && y >= 0.0 && y < 1.0)) {
      std::ostringstream msg;
      msg << "particle " << p << " at (" << x << ", " << y << ") lies outside the domain [0,1)^2";
      throw OutOfDomainError(p, msg.str());
    }
    if (!std::isfinite(particles[p].circulation)) {
      throw std::invalid_argument("particle " + std::to_string(p) + " has non-finite circulation");
    }
    // Scaling by a power of two is exact, so floor() honors the lower-inclusive edge.
    const int i = std::min(static_cast<int>(std::floor(std::ldexp(x, finest))), n - 1);
    const int j = std::min(static_cast<int>(std::floor(std::ldexp(y, finest))), n - 1);
    const std::size_t key = Quadtree::key(finest, i, j);
    out.box_particles[key].push_back(p);
    out.particle_box[p] = key;
  }
  return out;
}

namespace {

void check_level(const Quadtree& tree, int level, int min_level, const char* what) {
  if (level < min_level || level > tree.levels()) {
    std::ostringstream msg;
    msg << what << ": level " << level << " outside [" << min_level << ", " << tree.levels() << "]";
    throw std::invalid_argument(msg.str());
  }
}

bool adjacent(int i0, int j0, int i1, int j1) {
  return std::abs(i0 - i1) <= 1 && std::abs(j0 - j1) <= 1 && !(i0 == i1 && j0 == j1);
}

}  // namespace

NeighborLists neighbor_lists(const Quadtree& tree, int level) {
  check_level(tree, level, 1, "neighbor_lists");
  const int n = Quadtree::side(level);
  NeighborLists out;
  out.level = level;
  out.lists.resize(Quadtree::box_count(level));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      auto& list = out.lists[Quadtree::key(level, i, j)];
      for (int nj = std::max(j - 1, 0); nj <= std::min(j + 1, n - 1); ++nj) {
        for (int ni = std::max(i - 1, 0); ni <= std::min(i + 1, n - 1); ++ni) {
          if (ni != i || nj != j) list.push_back(Quadtree::key(level, ni, nj));
        }
      }
    }
  }
  return out;
}

InteractionLists interaction_lists(const Quadtree& tree, int level) {
  check_level(tree, level, 2, "interaction_lists");
  const int n = Quadtree::side(level);
  const int pn = n / 2;
  InteractionLists out;
  out.level = level;
  out.lists.resize(Quadtree::box_count(level));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      auto& list = out.lists[Quadtree::key(level, i, j)];
      const int pi = i / 2;
      const int pj = j / 2;
      // Children of the parent's closed neighborhood span a 6x6 window (clipped).
      const int lo_i = std::max(pi - 1, 0) * 2;
      const int hi_i = (std::min(pi + 1, pn - 1)) * 2 + 1;
      const int lo_j = std::max(pj - 1, 0) * 2;
      const int hi_j = (std::min(pj + 1, pn - 1)) * 2 + 1;
      for (int cj = lo_j; cj <= hi_j; ++cj) {
        for (int ci = lo_i; ci <= hi_i; ++ci) {
          if ((ci == i && cj == j) || adjacent(i, j, ci, cj)) continue;
          list.push_back(Quadtree::key(level, ci, cj));
        }
      }
    }
  }
  return out;
}

BoxClassCounts count_box_classes(const NeighborLists& neighbors) {
  BoxClassCounts counts;
  for (std::size_t key = 0; key < neighbors.size(); ++key) {
    switch (Quadtree::classify(neighbors.level, key)) {
      case BoxClass::corner: ++counts.corner; break;
      case BoxClass::edge: ++counts.edge; break;
      case BoxClass::interior: ++counts.interior; break;
    }
  }
  return counts;
}

}  // namespace overlapfmm
