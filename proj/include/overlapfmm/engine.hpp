#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "overlapfmm/costmodel.hpp"
#include "overlapfmm/expansion.hpp"
#include "overlapfmm/kernel.hpp"
#include "overlapfmm/quadtree.hpp"

namespace overlapfmm {

/// The ten computational stages of one FMM evaluation, numbered 1..10.
enum Stage : int {
  kTreeConstruction = 1,
  kParticleBinning = 2,
  kInteractionLists = 3,
  kP2M = 4,
  kM2M = 5,
  kM2L = 6,
  kL2L = 7,
  kL2P = 8,
  kNearField = 9,
  kCombine = 10,
};
inline constexpr int kStageCount = 10;

std::string_view stage_name(int stage);

struct FmmConfig {
  int levels = 3;
  int order = kDefaultOrder;
  std::optional<double> sigma;  // defaults to finest box width / 10
  ExecutionMode mode = ExecutionMode::sequential;
  int workers = 1;

  void validate() const;
  double resolved_sigma() const { return sigma.value_or(Quadtree::width(levels) / 10.0); }
};

struct StageStats {
  std::uint64_t flops = 0;
  double seconds = 0.0;
  std::uint64_t tasks = 0;
};

struct StageReport {
  std::array<StageStats, kStageCount> stages{};
  std::uint64_t near_pair_evaluations = 0;
  std::size_t particles = 0;
  int levels = 0;
  int order = 0;
  bool uniform_boxes = false;  // every finest box holds the same number of particles

  StageStats& stage(int s) { return stages.at(static_cast<std::size_t>(s - 1)); }
  const StageStats& stage(int s) const { return stages.at(static_cast<std::size_t>(s - 1)); }
  double particles_per_box() const;
};

using MultipoleLevels = std::vector<std::vector<MultipoleExpansion>>;  // [level][key]
using LocalLevels = std::vector<std::vector<LocalExpansion>>;          // [level][key]

/// Buffers and per-box task bodies of one FMM evaluation. Each method is the
/// work of one task instance and returns the flops it performed. A task
/// writes only the slots of its own box, so independent tasks may run
/// concurrently once their dependencies have completed.
class FmmState {
 public:
  FmmState(const Quadtree& tree, std::span<const Particle> particles, const FmmConfig& config);

  std::uint64_t allocate();                          // stage 1
  std::uint64_t bin();                               // stage 2
  std::uint64_t build_lists();                       // stage 3
  std::uint64_t p2m_box(std::size_t key);            // stage 4, finest level
  std::uint64_t m2m_box(int level, std::size_t key); // stage 5, levels 2..L-1
  std::uint64_t m2l_box(int level, std::size_t key); // stage 6, levels 2..L
  std::uint64_t l2l_box(int level, std::size_t key); // stage 7, levels 3..L
  std::uint64_t l2p_box(std::size_t key);            // stage 8, finest level
  std::uint64_t near_box(std::size_t key);           // stage 9, finest level
  std::uint64_t combine_box(std::size_t key);        // stage 10, finest level

  const Quadtree& tree() const { return tree_; }
  const FmmConfig& config() const { return config_; }
  const Binning& binning() const { return binning_; }
  const MultipoleLevels& multipoles() const { return multipoles_; }
  const LocalLevels& locals() const { return locals_; }
  const std::vector<Velocity>& far() const { return far_; }
  const std::vector<Velocity>& near() const { return near_; }
  const std::vector<Velocity>& total() const { return total_; }
  std::uint64_t near_pairs_in_box(std::size_t key) const { return near_pairs_[key]; }

  /// Report skeleton (sizes, uniformity) for a completed run.
  StageReport make_report() const;

 private:
  const Quadtree& tree_;
  std::span<const Particle> particles_;
  FmmConfig config_;
  KernelParams kernel_;
  Binning binning_;
  NeighborLists neighbors_;
  std::vector<InteractionLists> interactions_;  // indexed by level
  MultipoleLevels multipoles_;
  LocalLevels locals_;
  std::vector<Velocity> far_;
  std::vector<Velocity> near_;
  std::vector<Velocity> total_;
  std::vector<std::uint64_t> near_pairs_;
};

struct FmmResult {
  std::vector<Velocity> velocities;
  StageReport report;
};

/// Single-threaded reference evaluation of all ten stages. In overlapped mode
/// the near-field boxes are interleaved with the sweep levels; the result is
/// bitwise identical to sequential mode.
FmmResult compute_velocities(std::span<const Particle> particles, const FmmConfig& config);

/// Multipoles for levels 2..L (coarser levels left empty).
MultipoleLevels upward_sweep(const Quadtree& tree, const Binning& binning, std::span<const Particle> particles,
                             int order);

/// Locals for levels 2..L from the given multipoles; interactions is indexed by level.
LocalLevels downward_sweep(const Quadtree& tree, const MultipoleLevels& multipoles,
                           std::span<const InteractionLists> interactions, int order);
LocalLevels downward_sweep(const Quadtree& tree, const MultipoleLevels& multipoles, int order);

/// far[i] + near[i]; throws InvariantViolation on a length mismatch.
std::vector<Velocity> combine(std::span<const Velocity> far, std::span<const Velocity> near);

struct FlopReportRow {
  int stage = 0;
  std::uint64_t instrumented = 0;
  std::optional<double> model;  // closed-form count, when one applies
  bool reconciled = false;      // instrumented count is expected to equal the model exactly
  bool mismatch = false;
};

struct FlopReport {
  std::vector<FlopReportRow> rows;
  double particles_per_box = 0.0;
  bool any_mismatch = false;
};

/// Instrumented counts next to the closed forms. P2M is checked against
/// (8t + 3) N and the near field against work_direct(L, B) (uniform boxes only);
/// the translation stages list the model polynomials for reference.
FlopReport flop_report(const StageReport& report);

}  // namespace overlapfmm
