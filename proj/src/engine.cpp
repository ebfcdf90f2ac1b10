#include "overlapfmm/engine.hpp"

#include <chrono>
#include <stdexcept>

namespace overlapfmm {

std::string_view stage_name(int stage) {
  switch (stage) {
    case kTreeConstruction: return "tree_construction";
    case kParticleBinning: return "particle_binning";
    case kInteractionLists: return "interaction_lists";
    case kP2M: return "p2m";
    case kM2M: return "m2m";
    case kM2L: return "m2l";
    case kL2L: return "l2l";
    case kL2P: return "l2p";
    case kNearField: return "near_field";
    case kCombine: return "combine";
    default: return "unknown";
  }
}

void FmmConfig::validate() const {
  if (levels < 2) throw std::invalid_argument("FmmConfig: levels must be >= 2");
  if (order < 1 || order > kMaxOrder) {
    throw std::invalid_argument("FmmConfig: order must be in [1, " + std::to_string(kMaxOrder) + "]");
  }
  if (workers < 1) throw std::invalid_argument("FmmConfig: workers must be >= 1");
  KernelParams check(resolved_sigma());
  (void)check;
}

double StageReport::particles_per_box() const {
  return levels < 2 ? 0.0 : static_cast<double>(particles) / static_cast<double>(Quadtree::box_count(levels));
}

namespace {

void allocate_multipoles(const Quadtree& tree, int order, MultipoleLevels& out) {
  out.assign(static_cast<std::size_t>(tree.levels()) + 1, {});
  for (int l = 2; l <= tree.levels(); ++l) {
    auto& level = out[l];
    level.reserve(Quadtree::box_count(l));
    for (const Box& box : tree.level_boxes(l)) level.emplace_back(box.center, order, box.width);
  }
}

void allocate_locals(const Quadtree& tree, int order, LocalLevels& out) {
  out.assign(static_cast<std::size_t>(tree.levels()) + 1, {});
  for (int l = 2; l <= tree.levels(); ++l) {
    auto& level = out[l];
    level.reserve(Quadtree::box_count(l));
    for (const Box& box : tree.level_boxes(l)) level.emplace_back(box.center, order);
  }
}

void reset(std::vector<Complex>& coeffs) { std::fill(coeffs.begin(), coeffs.end(), Complex{}); }

void fill_p2m(const Binning& binning, std::span<const Particle> particles, int finest, std::size_t key,
              MultipoleLevels& multipoles, FlopTally* tally) {
  auto& target = multipoles[finest][key];
  reset(target.coeffs);
  p2m_accumulate(particles, binning.box_particles[key], target, tally);
}

void fill_m2m(int level, std::size_t key, MultipoleLevels& multipoles, FlopTally* tally) {
  auto& parent = multipoles[level][key];
  reset(parent.coeffs);
  for (const std::size_t child : Quadtree::child_keys(level, key)) {
    m2m_accumulate(multipoles[level + 1][child], parent, tally);
  }
}

void fill_m2l(int level, std::size_t key, const MultipoleLevels& multipoles, const InteractionLists& interactions,
              LocalLevels& locals, FlopTally* tally) {
  auto& target = locals[level][key];
  reset(target.coeffs);
  for (const std::size_t source : interactions[key]) m2l_accumulate(multipoles[level][source], target, tally);
}

void fill_l2l(int level, std::size_t key, LocalLevels& locals, FlopTally* tally) {
  l2l_accumulate(locals[level - 1][Quadtree::parent_key(level, key)], locals[level][key], tally);
}

}  // namespace

FmmState::FmmState(const Quadtree& tree, std::span<const Particle> particles, const FmmConfig& config)
    : tree_(tree), particles_(particles), config_(config), kernel_(config.resolved_sigma()) {
  config_.validate();
  if (config_.levels != tree.levels()) {
    throw std::invalid_argument("FmmState: configuration levels do not match the tree");
  }
}

std::uint64_t FmmState::allocate() {
  allocate_multipoles(tree_, config_.order, multipoles_);
  allocate_locals(tree_, config_.order, locals_);
  far_.assign(particles_.size(), Velocity{});
  near_.assign(particles_.size(), Velocity{});
  total_.assign(particles_.size(), Velocity{});
  near_pairs_.assign(Quadtree::box_count(tree_.levels()), 0);
  return 0;
}

std::uint64_t FmmState::bin() {
  binning_ = bin_particles(tree_, particles_);
  return 0;
}

std::uint64_t FmmState::build_lists() {
  neighbors_ = neighbor_lists(tree_, tree_.levels());
  interactions_.assign(static_cast<std::size_t>(tree_.levels()) + 1, {});
  for (int l = 2; l <= tree_.levels(); ++l) interactions_[l] = interaction_lists(tree_, l);
  return 0;
}

std::uint64_t FmmState::p2m_box(std::size_t key) {
  FlopTally tally;
  fill_p2m(binning_, particles_, tree_.levels(), key, multipoles_, &tally);
  return tally.flops;
}

std::uint64_t FmmState::m2m_box(int level, std::size_t key) {
  FlopTally tally;
  fill_m2m(level, key, multipoles_, &tally);
  return tally.flops;
}

std::uint64_t FmmState::m2l_box(int level, std::size_t key) {
  FlopTally tally;
  fill_m2l(level, key, multipoles_, interactions_[level], locals_, &tally);
  return tally.flops;
}

std::uint64_t FmmState::l2l_box(int level, std::size_t key) {
  FlopTally tally;
  fill_l2l(level, key, locals_, &tally);
  return tally.flops;
}

std::uint64_t FmmState::l2p_box(std::size_t key) {
  FlopTally tally;
  const LocalExpansion& local = locals_[tree_.levels()][key];
  for (const std::size_t p : binning_.box_particles[key]) far_[p] = l2p(local, particles_[p].position, &tally);
  return tally.flops;
}

std::uint64_t FmmState::near_box(std::size_t key) {
  near_pairs_[key] = near_field_box(key, binning_, neighbors_, particles_, kernel_, near_);
  return near_pairs_[key] * kFlopsPerKernelEval;
}

std::uint64_t FmmState::combine_box(std::size_t key) {
  for (const std::size_t p : binning_.box_particles[key]) total_[p] = far_[p] + near_[p];
  return 2 * binning_.box_particles[key].size();
}

StageReport FmmState::make_report() const {
  StageReport report;
  report.particles = particles_.size();
  report.levels = tree_.levels();
  report.order = config_.order;
  report.uniform_boxes = true;
  for (const auto& bin : binning_.box_particles) {
    if (bin.size() != binning_.box_particles.front().size()) report.uniform_boxes = false;
  }
  for (const std::uint64_t pairs : near_pairs_) report.near_pair_evaluations += pairs;
  return report;
}

namespace {

class StageTimer {
 public:
  explicit StageTimer(StageReport& report) : report_(report) {}

  template <typename Fn>
  void run(int stage, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t flops = fn();
    const auto end = std::chrono::steady_clock::now();
    auto& s = report_.stage(stage);
    s.flops += flops;
    s.seconds += std::chrono::duration<double>(end - start).count();
    ++s.tasks;
  }

 private:
  StageReport& report_;
};

}  // namespace

FmmResult compute_velocities(std::span<const Particle> particles, const FmmConfig& config) {
  config.validate();
  StageReport timings;
  StageTimer timer(timings);

  const auto tree_start = std::chrono::steady_clock::now();
  const Quadtree tree(config.levels);
  FmmState state(tree, particles, config);
  state.allocate();
  timings.stage(kTreeConstruction).seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - tree_start).count();
  timings.stage(kTreeConstruction).tasks = 1;

  timer.run(kParticleBinning, [&] { return state.bin(); });
  timer.run(kInteractionLists, [&] { return state.build_lists(); });

  const int finest = tree.levels();
  const std::size_t finest_boxes = Quadtree::box_count(finest);

  // Overlapped mode hands out the near-field boxes in slices between sweep levels.
  const bool overlapped = config.mode == ExecutionMode::overlapped;
  const int sweep_slots = (finest - 2) + (finest - 1) + (finest - 2);  // M2M, M2L, L2L level passes
  const std::size_t slice = overlapped ? (finest_boxes + sweep_slots) / (sweep_slots + 1) : 0;
  std::size_t next_near = 0;
  auto near_slice = [&] {
    for (std::size_t n = 0; n < slice && next_near < finest_boxes; ++n, ++next_near) {
      timer.run(kNearField, [&] { return state.near_box(next_near); });
    }
  };

  for (std::size_t key = 0; key < finest_boxes; ++key) timer.run(kP2M, [&] { return state.p2m_box(key); });
  for (int l = finest - 1; l >= 2; --l) {
    for (std::size_t key = 0; key < Quadtree::box_count(l); ++key) {
      timer.run(kM2M, [&] { return state.m2m_box(l, key); });
    }
    near_slice();
  }
  for (int l = 2; l <= finest; ++l) {
    for (std::size_t key = 0; key < Quadtree::box_count(l); ++key) {
      timer.run(kM2L, [&] { return state.m2l_box(l, key); });
    }
    near_slice();
    if (l >= 3) {
      for (std::size_t key = 0; key < Quadtree::box_count(l); ++key) {
        timer.run(kL2L, [&] { return state.l2l_box(l, key); });
      }
      near_slice();
    }
  }
  for (std::size_t key = 0; key < finest_boxes; ++key) timer.run(kL2P, [&] { return state.l2p_box(key); });
  for (; next_near < finest_boxes; ++next_near) timer.run(kNearField, [&] { return state.near_box(next_near); });
  for (std::size_t key = 0; key < finest_boxes; ++key) timer.run(kCombine, [&] { return state.combine_box(key); });

  FmmResult result;
  result.report = state.make_report();
  result.report.stages = timings.stages;
  result.velocities = state.total();
  return result;
}

MultipoleLevels upward_sweep(const Quadtree& tree, const Binning& binning, std::span<const Particle> particles,
                             int order) {
  MultipoleLevels multipoles;
  allocate_multipoles(tree, order, multipoles);
  const int finest = tree.levels();
  for (std::size_t key = 0; key < Quadtree::box_count(finest); ++key) {
    fill_p2m(binning, particles, finest, key, multipoles, nullptr);
  }
  for (int l = finest - 1; l >= 2; --l) {
    for (std::size_t key = 0; key < Quadtree::box_count(l); ++key) fill_m2m(l, key, multipoles, nullptr);
  }
  return multipoles;
}

LocalLevels downward_sweep(const Quadtree& tree, const MultipoleLevels& multipoles,
                           std::span<const InteractionLists> interactions, int order) {
  if (interactions.size() < static_cast<std::size_t>(tree.levels()) + 1) {
    throw std::invalid_argument("downward_sweep: need interaction lists for levels 2..L");
  }
  LocalLevels locals;
  allocate_locals(tree, order, locals);
  for (int l = 2; l <= tree.levels(); ++l) {
    for (std::size_t key = 0; key < Quadtree::box_count(l); ++key) {
      fill_m2l(l, key, multipoles, interactions[l], locals, nullptr);
      if (l >= 3) fill_l2l(l, key, locals, nullptr);
    }
  }
  return locals;
}

LocalLevels downward_sweep(const Quadtree& tree, const MultipoleLevels& multipoles, int order) {
  std::vector<InteractionLists> interactions(static_cast<std::size_t>(tree.levels()) + 1);
  for (int l = 2; l <= tree.levels(); ++l) interactions[l] = interaction_lists(tree, l);
  return downward_sweep(tree, multipoles, interactions, order);
}

std::vector<Velocity> combine(std::span<const Velocity> far, std::span<const Velocity> near) {
  if (far.size() != near.size()) {
    throw InvariantViolation("combine: far and near fields have different lengths (" +
                             std::to_string(far.size()) + " vs " + std::to_string(near.size()) + ")");
  }
  std::vector<Velocity> out(far.size());
  for (std::size_t i = 0; i < far.size(); ++i) out[i] = far[i] + near[i];
  return out;
}

FlopReport flop_report(const StageReport& report) {
  FlopReport out;
  out.particles_per_box = report.particles_per_box();
  const double n = static_cast<double>(report.particles);
  const int t = report.order;
  for (int s = 1; s <= kStageCount; ++s) {
    FlopReportRow row;
    row.stage = s;
    row.instrumented = report.stage(s).flops;
    switch (s) {
      case kP2M:
        // The leading constant of the initialization count belongs to the lower-order remainder.
        row.model = work_init(n, t) - 2.0;
        row.reconciled = true;
        break;
      case kM2M:
        row.model = work_up(report.levels, t);
        break;
      case kM2L:
        row.model = work_m2l(report.levels, t);
        break;
      case kL2L:
        if (report.levels >= 3) row.model = work_l2l(report.levels, t);
        break;
      case kL2P:
        row.model = (8.0 * t + 2.0) * n;
        break;
      case kNearField:
        if (report.uniform_boxes || report.particles == 0) {
          row.model = work_direct(report.levels, out.particles_per_box);
          row.reconciled = true;
        }
        break;
      default:
        break;
    }
    if (row.reconciled && row.model) {
      row.mismatch = static_cast<double>(row.instrumented) != *row.model;
      out.any_mismatch = out.any_mismatch || row.mismatch;
    }
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace overlapfmm
