#include <algorithm>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "overlapfmm/particle_io.hpp"
#include "overlapfmm/quadtree.hpp"

using namespace overlapfmm;

TEST_CASE("build_tree box counts and geometry") {
  const Quadtree t2 = build_tree(2);
  CHECK(t2.level_boxes(1).size() == 4);
  CHECK(t2.level_boxes(2).size() == 16);

  const Quadtree t3 = build_tree(3);
  CHECK(t3.level_boxes(3).size() == 64);
  for (const Box& b : t3.level_boxes(3)) CHECK(b.width == 0.125);

  const Quadtree t4 = build_tree(4);
  for (int l = 0; l <= 4; ++l) {
    CHECK(t4.level_boxes(l).size() == Quadtree::box_count(l));
    for (const Box& b : t4.level_boxes(l)) CHECK(b.width == std::ldexp(1.0, -l));
  }
  // Children sit at +-width/4 from the parent center in each axis.
  const Box& parent = t4.box(3, Quadtree::key(3, 0, 0));
  std::set<std::pair<double, double>> offsets;
  for (const std::size_t c : Quadtree::child_keys(3, parent.i + parent.j * 8)) {
    const Box& child = t4.box(4, c);
    offsets.insert({child.center.real() - parent.center.real(), child.center.imag() - parent.center.imag()});
    CHECK(Quadtree::parent_key(4, c) == Quadtree::key(3, 0, 0));
  }
  const double q = parent.width / 4;
  CHECK(offsets == std::set<std::pair<double, double>>{{-q, -q}, {q, -q}, {-q, q}, {q, q}});
}

TEST_CASE("build_tree rejects fewer than two levels") {
  CHECK_THROWS_AS(build_tree(1), std::invalid_argument);
  CHECK_THROWS_AS(build_tree(-3), std::invalid_argument);
}

TEST_CASE("parent/child links are consistent on every level") {
  const Quadtree tree = build_tree(4);
  for (int l = 0; l < 4; ++l) {
    for (std::size_t k = 0; k < Quadtree::box_count(l); ++k) {
      for (const std::size_t c : Quadtree::child_keys(l, k)) CHECK(Quadtree::parent_key(l + 1, c) == k);
    }
  }
}

TEST_CASE("bin_particles edge conventions") {
  const Quadtree tree = build_tree(2);
  const std::vector<Particle> ps{{{0.1, 0.1}, 1.0}, {{0.25, 0.25}, 1.0}, {{0.0, 0.999}, 1.0}};
  const Binning b = bin_particles(tree, ps);
  CHECK(b.particle_box[0] == Quadtree::key(2, 0, 0));
  CHECK(b.particle_box[1] == Quadtree::key(2, 1, 1));
  CHECK(b.particle_box[2] == Quadtree::key(2, 0, 3));
}

TEST_CASE("bin_particles names the offending particle") {
  const Quadtree tree = build_tree(2);
  const std::vector<Particle> ps{{{0.5, 0.5}, 1.0}, {{0.2, 0.3}, 1.0}, {{1.0, 0.5}, 1.0}};
  try {
    bin_particles(tree, ps);
    FAIL("expected OutOfDomainError");
  } catch (const OutOfDomainError& e) {
    CHECK(e.index() == 2);
    CHECK(std::string(e.what()).find("particle 2") != std::string::npos);
  }
  const std::vector<Particle> neg{{{-1e-300, 0.5}, 1.0}};
  CHECK_THROWS_AS(bin_particles(tree, neg), OutOfDomainError);
}

TEST_CASE("lattice generator puts exactly B particles in every finest box") {
  for (const auto& [levels, per_box] : std::vector<std::pair<int, int>>{{2, 10}, {3, 16}, {4, 7}}) {
    const auto ps = lattice_particles(levels, per_box);
    const Binning b = bin_particles(build_tree(levels), ps);
    std::size_t total = 0;
    for (const auto& bin : b.box_particles) {
      CHECK(bin.size() == static_cast<std::size_t>(per_box));
      total += bin.size();
    }
    CHECK(total == ps.size());
  }
}

TEST_CASE("binning is a partition respecting half-open extents") {
  const Quadtree tree = build_tree(3);
  const auto ps = random_particles(500, 7);
  const Binning b = bin_particles(tree, ps);
  std::vector<int> seen(ps.size(), 0);
  for (std::size_t key = 0; key < b.box_particles.size(); ++key) {
    const Box& box = tree.box(3, key);
    for (const std::size_t p : b.box_particles[key]) {
      ++seen[p];
      CHECK(b.particle_box[p] == key);
      const double x0 = box.center.real() - box.width / 2, y0 = box.center.imag() - box.width / 2;
      CHECK(ps[p].position.real() >= x0);
      CHECK(ps[p].position.real() < x0 + box.width);
      CHECK(ps[p].position.imag() >= y0);
      CHECK(ps[p].position.imag() < y0 + box.width);
    }
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
}

TEST_CASE("neighbor list class counts") {
  const Quadtree tree = build_tree(4);
  const auto c2 = count_box_classes(neighbor_lists(tree, 2));
  CHECK(c2.corner == 4);
  CHECK(c2.edge == 8);
  CHECK(c2.interior == 4);
  const auto c3 = count_box_classes(neighbor_lists(tree, 3));
  CHECK(c3.corner == 4);
  CHECK(c3.edge == 24);
  CHECK(c3.interior == 36);
  for (int l = 1; l <= 4; ++l) {
    const auto c = count_box_classes(neighbor_lists(tree, l));
    CHECK(c.corner + c.edge + c.interior == Quadtree::box_count(l));
    CHECK(c.edge == (std::size_t{1} << (l + 2)) - 8);
    CHECK(c.interior == Quadtree::box_count(l) - (std::size_t{1} << (l + 2)) + 4);
  }
  CHECK(neighbor_lists(tree, 2)[Quadtree::key(2, 0, 0)].size() == 3);
  CHECK_THROWS_AS(neighbor_lists(tree, 0), std::invalid_argument);
  CHECK_THROWS_AS(neighbor_lists(tree, 5), std::invalid_argument);
}

TEST_CASE("neighbor lists match enumeration, are symmetric and sized by class") {
  const Quadtree tree = build_tree(4);
  for (int l = 1; l <= 4; ++l) {
    const int n = Quadtree::side(l);
    const NeighborLists nl = neighbor_lists(tree, l);
    for (std::size_t key = 0; key < nl.size(); ++key) {
      const int i = static_cast<int>(key) % n, j = static_cast<int>(key) / n;
      std::set<std::pair<int, int>> got;
      for (const std::size_t k : nl[key]) {
        got.insert({static_cast<int>(k) % n, static_cast<int>(k) / n});
        const auto& back = nl[k];
        CHECK(std::find(back.begin(), back.end(), key) != back.end());
      }
      CHECK(got == oracle::grid_neighbors(n, i, j));
      const std::size_t expected = Quadtree::classify(l, key) == BoxClass::corner ? 3
                                   : Quadtree::classify(l, key) == BoxClass::edge ? 5
                                                                                   : 8;
      CHECK(nl[key].size() == expected);
      CHECK(std::is_sorted(nl[key].begin(), nl[key].end()));
    }
  }
}

TEST_CASE("interaction list sizes") {
  const Quadtree tree = build_tree(4);
  const InteractionLists l2 = interaction_lists(tree, 2);
  CHECK(l2[Quadtree::key(2, 0, 0)].size() == 12);
  CHECK(l2[Quadtree::key(2, 1, 1)].size() == 7);
  const InteractionLists l3 = interaction_lists(tree, 3);
  CHECK(l3[Quadtree::key(3, 3, 4)].size() == 27);
  const InteractionLists l4 = interaction_lists(tree, 4);
  std::size_t max_size = 0;
  for (std::size_t k = 0; k < l4.size(); ++k) max_size = std::max(max_size, l4[k].size());
  CHECK(max_size == 27);
  CHECK_THROWS_AS(interaction_lists(tree, 1), std::invalid_argument);
}

TEST_CASE("interaction lists: disjoint, well separated, and complete by enumeration") {
  const Quadtree tree = build_tree(4);
  for (int l = 2; l <= 4; ++l) {
    const NeighborLists nl = neighbor_lists(tree, l);
    const NeighborLists parent_nl = neighbor_lists(tree, l - 1);
    const InteractionLists il = interaction_lists(tree, l);
    for (std::size_t key = 0; key < il.size(); ++key) {
      CHECK(il[key].size() <= 27);
      std::set<std::size_t> members(il[key].begin(), il[key].end());
      CHECK(members.size() == il[key].size());
      CHECK(!members.count(key));
      for (const std::size_t k : nl[key]) CHECK(!members.count(k));
      for (const std::size_t k : il[key]) {
        CHECK(std::abs(tree.box(l, k).center - tree.box(l, key).center) >= 2.0 * Quadtree::width(l) - 1e-15);
      }
      // {self} + neighbors + interaction list == children of the parent's closed neighborhood.
      std::set<std::size_t> lhs = members;
      lhs.insert(key);
      lhs.insert(nl[key].begin(), nl[key].end());
      std::set<std::size_t> rhs;
      const std::size_t parent = Quadtree::parent_key(l, key);
      std::vector<std::size_t> hood = parent_nl[parent];
      hood.push_back(parent);
      for (const std::size_t p : hood) {
        for (const std::size_t c : Quadtree::child_keys(l - 1, p)) rhs.insert(c);
      }
      CHECK(lhs == rhs);
    }
  }
}
