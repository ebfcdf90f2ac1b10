#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "overlapfmm/engine.hpp"

namespace overlapfmm {

/// One unit of scheduled work: a stage applied to one box (stages 4-10) or
/// the whole problem (stages 1-3, box == -1).
struct TaskInstance {
  int stage = 0;
  int level = -1;
  std::size_t key = 0;
  long long box = -1;  // Quadtree::global_index, or -1 for whole-problem stages
  std::vector<std::size_t> deps;
  std::vector<std::size_t> successors;
};

/// The FMM stage graph expanded into per-box task instances.
///
/// Stage-level edges (0 = start, 11 = end):
///   start->1, 1->2, 1->3, 2->4, 4->5, 5->6, 3->6, 6->7, 7->8, 2->9, 3->9, 8->10, 9->10, 10->end
/// Stages with no instances at a given depth (M2M and L2L when L = 2) are
/// bridged, so instance edges 4->6 and 6->8 may appear.
class TaskGraph {
 public:
  static constexpr int kStartNode = 0;
  static constexpr int kEndNode = 11;

  explicit TaskGraph(const Quadtree& tree);

  const Quadtree& tree() const { return tree_; }
  std::span<const TaskInstance> tasks() const { return tasks_; }
  const TaskInstance& task(std::size_t id) const { return tasks_.at(id); }
  std::size_t size() const { return tasks_.size(); }
  std::size_t stage_task_count(int stage) const;

  std::optional<std::size_t> find(int stage, long long box) const;
  std::string describe(std::size_t id) const;

  static std::span<const std::pair<int, int>> stage_edges();
  static bool stage_edge(int from, int to);
  static bool stage_path_exists(int from, int to);

  /// Marks every task reachable from `sources` following successor (forward)
  /// or dependency (backward) edges. Sources themselves are not marked
  /// unless reachable.
  std::vector<bool> reachable(std::span<const std::size_t> sources, bool forward) const;

  /// Throws InvariantViolation when the instance graph has a cycle.
  std::vector<std::size_t> topological_order() const;

 private:
  std::size_t add(int stage, int level, std::size_t key, std::vector<std::size_t> deps);

  Quadtree tree_;
  std::vector<TaskInstance> tasks_;
  std::map<std::pair<int, long long>, std::size_t> index_;
};

TaskGraph build_dag(const Quadtree& tree);

struct TraceEntry {
  std::size_t task = 0;
  int stage = 0;
  long long box = -1;
  int worker = 0;
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
};

struct ExecutionTrace {
  std::vector<TraceEntry> entries;
  int workers = 1;
};

/// Ready-task selection shared by the threaded executor and the simulator.
///
/// Sweep and bookkeeping tasks are served before near-field tasks, lowest
/// task id first within a class. In sequential mode near-field tasks are
/// withheld until every L2P task has finished. Not thread-safe.
class Dispatcher {
 public:
  Dispatcher(const TaskGraph& graph, ExecutionMode mode);

  std::optional<std::size_t> next();
  void complete(std::size_t task);
  bool has_ready() const { return !sweep_ready_.empty() || !near_ready_.empty(); }
  bool finished() const { return completed_ == graph_.size(); }

 private:
  void release(std::size_t task);

  const TaskGraph& graph_;
  ExecutionMode mode_;
  std::vector<std::size_t> pending_deps_;
  std::set<std::size_t> sweep_ready_;  // ordered by task id
  std::set<std::size_t> near_ready_;
  std::vector<std::size_t> withheld_;
  std::size_t l2p_remaining_;
  std::size_t completed_ = 0;
};

struct ExecutionResult {
  std::vector<Velocity> velocities;
  ExecutionTrace trace;
  StageReport report;
  double wall_seconds = 0.0;
};

/// A task threw; carries the trace of the tasks that did finish.
class ExecutionAborted : public std::runtime_error {
 public:
  ExecutionAborted(const std::string& what, ExecutionTrace partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const ExecutionTrace& partial_trace() const { return partial_; }

 private:
  ExecutionTrace partial_;
};

/// Runs the task graph on config.workers threads in config.mode. Velocities are
/// bitwise identical for every mode and worker count.
ExecutionResult execute(const TaskGraph& graph, std::span<const Particle> particles, const FmmConfig& config);

/// Test hook: called before each task runs; throwing aborts the execution.
using TaskHook = std::function<void(const TaskInstance&)>;
ExecutionResult execute(const TaskGraph& graph, std::span<const Particle> particles, const FmmConfig& config,
                        const TaskHook& before_task);

/// Virtual-time execution of the same policy with the given task durations (ns).
ExecutionTrace simulate_schedule(const TaskGraph& graph, ExecutionMode mode, int workers,
                                 const std::function<std::int64_t(const TaskInstance&)>& duration_ns);

enum class Phase { setup = 0, up_sweep = 1, down_sweep = 2, evaluation = 3 };
inline constexpr int kPhaseCount = 4;
Phase phase_of(int stage);

struct TraceValidation {
  bool ok = true;
  std::vector<std::string> violations;
  std::int64_t makespan_ns = 0;
  /// idle_ns[worker][phase]: length of the phase window minus the worker's busy
  /// time inside it. A phase window spans its tasks' first start to last end.
  std::vector<std::array<std::int64_t, kPhaseCount>> idle_ns;
  /// Sweep window: first start to last end of the M2M, M2L and L2L tasks.
  std::int64_t sweep_window_ns = 0;
  std::int64_t idle_in_sweep_ns = 0;       // summed over workers
  std::int64_t near_field_in_sweep_ns = 0; // near-field busy time inside the sweep window
};

/// Checks that every task ran exactly once, after all of its dependencies
/// ended, and that no worker ran two tasks at once.
TraceValidation validate_trace(const TaskGraph& graph, const ExecutionTrace& trace);

/// Rows "stage,box,worker,start_ns,end_ns".
void write_trace(std::ostream& out, const ExecutionTrace& trace);
ExecutionTrace read_trace(std::istream& in, const TaskGraph& graph);

}  // namespace overlapfmm
