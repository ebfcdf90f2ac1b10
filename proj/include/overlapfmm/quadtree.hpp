#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "overlapfmm/types.hpp"

namespace overlapfmm {

/// A box of the uniform quadtree over [0,1)^2. (i, j) are the column and row
/// indices on its level; boxes are keyed row-major as j * 2^level + i.
struct Box {
  int level = 0;
  int i = 0;
  int j = 0;
  Complex center;
  double width = 1.0;
};

enum class BoxClass { corner, edge, interior };

/// Uniform, fully materialized 2^l x 2^l box hierarchy for levels 0..L.
class Quadtree {
 public:
  explicit Quadtree(int levels);

  int levels() const { return levels_; }
  static std::size_t box_count(int level) { return std::size_t{1} << (2 * level); }
  static int side(int level) { return 1 << level; }
  static double width(int level) { return std::ldexp(1.0, -level); }

  const Box& box(int level, std::size_t key) const { return boxes_.at(level).at(key); }
  std::span<const Box> level_boxes(int level) const { return boxes_.at(level); }

  static std::size_t key(int level, int i, int j) {
    return static_cast<std::size_t>(j) * side(level) + static_cast<std::size_t>(i);
  }
  static std::size_t parent_key(int level, std::size_t key);
  static std::array<std::size_t, 4> child_keys(int level, std::size_t key);

  /// Unique index across all levels: (4^level - 1)/3 + key.
  static std::size_t global_index(int level, std::size_t key) {
    return (box_count(level) - 1) / 3 + key;
  }

  static BoxClass classify(int level, std::size_t key);

 private:
  int levels_;
  std::vector<std::vector<Box>> boxes_;
};

Quadtree build_tree(int levels);

/// Finest-level assignment of particles. Each bin lists particle indices in
/// ascending order.
struct Binning {
  std::vector<std::vector<std::size_t>> box_particles;
  std::vector<std::size_t> particle_box;
};

/// Throws OutOfDomainError naming the first particle outside [0,1)^2.
Binning bin_particles(const Quadtree& tree, std::span<const Particle> particles);

/// Per-box lists of same-level box keys, sorted ascending.
struct BoxLists {
  int level = 0;
  std::vector<std::vector<std::size_t>> lists;

  const std::vector<std::size_t>& operator[](std::size_t key) const { return lists[key]; }
  std::size_t size() const { return lists.size(); }
};

using NeighborLists = BoxLists;
using InteractionLists = BoxLists;

/// Edge- and corner-adjacent boxes, self excluded. Requires 1 <= level <= L.
NeighborLists neighbor_lists(const Quadtree& tree, int level);

/// Children of the parent's closed neighborhood that are neither the box nor
/// one of its neighbors. Requires 2 <= level <= L.
InteractionLists interaction_lists(const Quadtree& tree, int level);

struct BoxClassCounts {
  std::size_t corner = 0;
  std::size_t edge = 0;
  std::size_t interior = 0;
};

BoxClassCounts count_box_classes(const NeighborLists& neighbors);

}  // namespace overlapfmm
