#include "overlapfmm/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <queue>
#include <sstream>
#include <thread>
#include <tuple>

namespace overlapfmm {

namespace {

constexpr std::array<std::pair<int, int>, 14> kStageEdges{{
    {0, 1}, {1, 2}, {1, 3}, {2, 4}, {4, 5}, {5, 6}, {3, 6},
    {6, 7}, {7, 8}, {2, 9}, {3, 9}, {8, 10}, {9, 10}, {10, 11},
}};

}  // namespace

TaskGraph::TaskGraph(const Quadtree& tree) : tree_(tree) {
  const int finest = tree.levels();
  const std::size_t finest_boxes = Quadtree::box_count(finest);

  const std::size_t tree_task = add(kTreeConstruction, -1, 0, {});
  const std::size_t bin_task = add(kParticleBinning, -1, 0, {tree_task});
  const std::size_t lists_task = add(kInteractionLists, -1, 0, {tree_task});

  std::vector<std::size_t> p2m(finest_boxes);
  for (std::size_t key = 0; key < finest_boxes; ++key) p2m[key] = add(kP2M, finest, key, {bin_task});

  // M2M from level L-1 up to 2; each box waits on its four children.
  std::vector<std::size_t> below = p2m;
  for (int l = finest - 1; l >= 2; --l) {
    std::vector<std::size_t> here(Quadtree::box_count(l));
    for (std::size_t key = 0; key < here.size(); ++key) {
      std::vector<std::size_t> deps;
      for (const std::size_t child : Quadtree::child_keys(l, key)) deps.push_back(below[child]);
      here[key] = add(kM2M, l, key, std::move(deps));
    }
    below = std::move(here);
  }
  // The level-2 multipoles complete the upward sweep.
  const std::vector<std::size_t> sweep_done = below;

  std::vector<std::size_t> previous;  // final local producers on level l-1
  for (int l = 2; l <= finest; ++l) {
    std::vector<std::size_t> m2l(Quadtree::box_count(l));
    for (std::size_t key = 0; key < m2l.size(); ++key) {
      std::vector<std::size_t> deps = sweep_done;
      deps.push_back(lists_task);
      m2l[key] = add(kM2L, l, key, std::move(deps));
    }
    if (l == 2) {
      previous = std::move(m2l);
      continue;
    }
    std::vector<std::size_t> l2l(m2l.size());
    for (std::size_t key = 0; key < l2l.size(); ++key) {
      l2l[key] = add(kL2L, l, key, {m2l[key], previous[Quadtree::parent_key(l, key)]});
    }
    previous = std::move(l2l);
  }

  std::vector<std::size_t> l2p(finest_boxes);
  for (std::size_t key = 0; key < finest_boxes; ++key) l2p[key] = add(kL2P, finest, key, {previous[key]});
  std::vector<std::size_t> near(finest_boxes);
  for (std::size_t key = 0; key < finest_boxes; ++key) near[key] = add(kNearField, finest, key, {bin_task, lists_task});
  for (std::size_t key = 0; key < finest_boxes; ++key) add(kCombine, finest, key, {l2p[key], near[key]});
}

std::size_t TaskGraph::add(int stage, int level, std::size_t key, std::vector<std::size_t> deps) {
  const std::size_t id = tasks_.size();
  TaskInstance t;
  t.stage = stage;
  t.level = level;
  t.key = key;
  t.box = level < 0 ? -1 : static_cast<long long>(Quadtree::global_index(level, key));
  t.deps = std::move(deps);
  for (const std::size_t d : t.deps) tasks_[d].successors.push_back(id);
  index_.emplace(std::make_pair(stage, t.box), id);
  tasks_.push_back(std::move(t));
  return id;
}

std::size_t TaskGraph::stage_task_count(int stage) const {
  return static_cast<std::size_t>(
      std::count_if(tasks_.begin(), tasks_.end(), [&](const TaskInstance& t) { return t.stage == stage; }));
}

std::optional<std::size_t> TaskGraph::find(int stage, long long box) const {
  const auto it = index_.find({stage, box});
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string TaskGraph::describe(std::size_t id) const {
  const TaskInstance& t = tasks_.at(id);
  std::ostringstream out;
  out << "stage " << t.stage << " (" << stage_name(t.stage) << ")";
  if (t.level >= 0) out << " level " << t.level << " box " << t.key;
  return out.str();
}

std::span<const std::pair<int, int>> TaskGraph::stage_edges() { return kStageEdges; }

bool TaskGraph::stage_edge(int from, int to) {
  return std::find(kStageEdges.begin(), kStageEdges.end(), std::make_pair(from, to)) != kStageEdges.end();
}

bool TaskGraph::stage_path_exists(int from, int to) {
  std::array<bool, kEndNode + 1> seen{};
  std::deque<int> queue{from};
  while (!queue.empty()) {
    const int at = queue.front();
    queue.pop_front();
    for (const auto& [a, b] : kStageEdges) {
      if (a != at || seen[b]) continue;
      if (b == to) return true;
      seen[b] = true;
      queue.push_back(b);
    }
  }
  return false;
}

std::vector<bool> TaskGraph::reachable(std::span<const std::size_t> sources, bool forward) const {
  std::vector<bool> seen(tasks_.size(), false);
  std::vector<std::size_t> stack(sources.begin(), sources.end());
  while (!stack.empty()) {
    const std::size_t at = stack.back();
    stack.pop_back();
    const auto& next = forward ? tasks_[at].successors : tasks_[at].deps;
    for (const std::size_t n : next) {
      if (!seen[n]) {
        seen[n] = true;
        stack.push_back(n);
      }
    }
  }
  return seen;
}

std::vector<std::size_t> TaskGraph::topological_order() const {
  std::vector<std::size_t> indegree(tasks_.size());
  std::vector<std::size_t> order;
  order.reserve(tasks_.size());
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    indegree[i] = tasks_[i].deps.size();
    if (indegree[i] == 0) order.push_back(i);
  }
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (const std::size_t s : tasks_[order[head]].successors) {
      if (--indegree[s] == 0) order.push_back(s);
    }
  }
  if (order.size() != tasks_.size()) throw InvariantViolation("task graph contains a cycle");
  return order;
}

TaskGraph build_dag(const Quadtree& tree) { return TaskGraph(tree); }

// --- dispatch policy ------------------------------------------------------

Dispatcher::Dispatcher(const TaskGraph& graph, ExecutionMode mode)
    : graph_(graph), mode_(mode), pending_deps_(graph.size()), l2p_remaining_(graph.stage_task_count(kL2P)) {
  for (std::size_t i = 0; i < graph.size(); ++i) {
    pending_deps_[i] = graph.task(i).deps.size();
    if (pending_deps_[i] == 0) release(i);
  }
}

void Dispatcher::release(std::size_t task) {
  if (graph_.task(task).stage != kNearField) {
    sweep_ready_.insert(task);
  } else if (mode_ == ExecutionMode::sequential && l2p_remaining_ > 0) {
    withheld_.push_back(task);
  } else {
    near_ready_.insert(task);
  }
}

std::optional<std::size_t> Dispatcher::next() {
  auto take = [](std::set<std::size_t>& queue) {
    const std::size_t id = *queue.begin();
    queue.erase(queue.begin());
    return id;
  };
  if (!sweep_ready_.empty()) return take(sweep_ready_);
  if (!near_ready_.empty()) return take(near_ready_);
  return std::nullopt;
}

void Dispatcher::complete(std::size_t task) {
  ++completed_;
  if (graph_.task(task).stage == kL2P && --l2p_remaining_ == 0) {
    near_ready_.insert(withheld_.begin(), withheld_.end());
    withheld_.clear();
  }
  for (const std::size_t s : graph_.task(task).successors) {
    if (--pending_deps_[s] == 0) release(s);
  }
}

// --- threaded execution ---------------------------------------------------

namespace {

std::uint64_t run_task(FmmState& state, const TaskInstance& task) {
  switch (task.stage) {
    case kTreeConstruction: return state.allocate();
    case kParticleBinning: return state.bin();
    case kInteractionLists: return state.build_lists();
    case kP2M: return state.p2m_box(task.key);
    case kM2M: return state.m2m_box(task.level, task.key);
    case kM2L: return state.m2l_box(task.level, task.key);
    case kL2L: return state.l2l_box(task.level, task.key);
    case kL2P: return state.l2p_box(task.key);
    case kNearField: return state.near_box(task.key);
    case kCombine: return state.combine_box(task.key);
    default: throw InvariantViolation("unknown stage " + std::to_string(task.stage));
  }
}

}  // namespace

ExecutionResult execute(const TaskGraph& graph, std::span<const Particle> particles, const FmmConfig& config) {
  return execute(graph, particles, config, {});
}

ExecutionResult execute(const TaskGraph& graph, std::span<const Particle> particles, const FmmConfig& config,
                        const TaskHook& before_task) {
  config.validate();
  FmmState state(graph.tree(), particles, config);
  Dispatcher dispatcher(graph, config.mode);

  std::mutex mutex;
  std::condition_variable cv;
  std::string failure;
  std::vector<std::uint64_t> task_flops(graph.size(), 0);
  std::vector<std::vector<TraceEntry>> per_worker(static_cast<std::size_t>(config.workers));

  const auto origin = std::chrono::steady_clock::now();
  auto since_origin = [&origin] {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - origin).count();
  };

  auto worker_loop = [&](int worker) {
    for (;;) {
      std::size_t id = 0;
      {
        std::unique_lock lock(mutex);
        cv.wait(lock, [&] { return !failure.empty() || dispatcher.finished() || dispatcher.has_ready(); });
        if (!failure.empty() || dispatcher.finished()) return;
        id = *dispatcher.next();
      }
      const TaskInstance& task = graph.task(id);
      TraceEntry entry{id, task.stage, task.box, worker, since_origin(), 0};
      try {
        if (before_task) before_task(task);
        task_flops[id] = run_task(state, task);
      } catch (const std::exception& e) {
        std::lock_guard lock(mutex);
        if (failure.empty()) failure = graph.describe(id) + " failed: " + e.what();
        cv.notify_all();
        return;
      }
      entry.end_ns = since_origin();
      per_worker[static_cast<std::size_t>(worker)].push_back(entry);
      {
        std::lock_guard lock(mutex);
        dispatcher.complete(id);
      }
      cv.notify_all();
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(config.workers));
    for (int w = 0; w < config.workers; ++w) pool.emplace_back(worker_loop, w);
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - origin).count();

  ExecutionTrace trace;
  trace.workers = config.workers;
  for (auto& entries : per_worker) trace.entries.insert(trace.entries.end(), entries.begin(), entries.end());
  std::sort(trace.entries.begin(), trace.entries.end(), [](const TraceEntry& a, const TraceEntry& b) {
    return std::tie(a.start_ns, a.worker) < std::tie(b.start_ns, b.worker);
  });

  if (!failure.empty()) throw ExecutionAborted(failure, std::move(trace));

  ExecutionResult result;
  result.report = state.make_report();
  for (const TraceEntry& e : trace.entries) {
    auto& s = result.report.stage(e.stage);
    s.flops += task_flops[e.task];
    s.seconds += static_cast<double>(e.end_ns - e.start_ns) * 1e-9;
    ++s.tasks;
  }
  result.trace = std::move(trace);
  result.velocities = state.total();
  result.wall_seconds = wall;
  return result;
}

ExecutionTrace simulate_schedule(const TaskGraph& graph, ExecutionMode mode, int workers,
                                 const std::function<std::int64_t(const TaskInstance&)>& duration_ns) {
  if (workers < 1) throw std::invalid_argument("simulate_schedule: workers must be >= 1");
  Dispatcher dispatcher(graph, mode);
  ExecutionTrace trace;
  trace.workers = workers;

  using Running = std::pair<std::int64_t, std::pair<int, std::size_t>>;  // end, (worker, task)
  std::priority_queue<Running, std::vector<Running>, std::greater<>> running;
  std::set<int> idle;
  for (int w = 0; w < workers; ++w) idle.insert(w);
  std::int64_t now = 0;

  while (!dispatcher.finished()) {
    while (!idle.empty() && dispatcher.has_ready()) {
      const std::size_t id = *dispatcher.next();
      const int worker = *idle.begin();
      idle.erase(idle.begin());
      const TaskInstance& task = graph.task(id);
      const std::int64_t end = now + std::max<std::int64_t>(duration_ns(task), 0);
      trace.entries.push_back({id, task.stage, task.box, worker, now, end});
      running.push({end, {worker, id}});
    }
    if (running.empty()) throw InvariantViolation("simulate_schedule: no runnable task (dependency deadlock)");
    now = running.top().first;
    while (!running.empty() && running.top().first == now) {
      const auto [worker, id] = running.top().second;
      running.pop();
      idle.insert(worker);
      dispatcher.complete(id);
    }
  }
  return trace;
}

// --- trace validation -----------------------------------------------------

Phase phase_of(int stage) {
  if (stage <= kInteractionLists) return Phase::setup;
  if (stage <= kM2M) return Phase::up_sweep;
  if (stage <= kL2L) return Phase::down_sweep;
  return Phase::evaluation;
}

namespace {

std::int64_t overlap(std::int64_t a0, std::int64_t a1, std::int64_t b0, std::int64_t b1) {
  return std::max<std::int64_t>(0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

TraceValidation validate_trace(const TaskGraph& graph, const ExecutionTrace& trace) {
  TraceValidation v;
  auto fail = [&v](std::string msg) {
    v.ok = false;
    v.violations.push_back(std::move(msg));
  };

  std::vector<const TraceEntry*> by_task(graph.size(), nullptr);
  int max_worker = trace.workers - 1;
  for (const TraceEntry& e : trace.entries) {
    if (e.task >= graph.size()) {
      fail("trace entry refers to unknown task " + std::to_string(e.task));
      continue;
    }
    if (e.end_ns < e.start_ns) fail(graph.describe(e.task) + " ends before it starts");
    if (by_task[e.task]) {
      fail(graph.describe(e.task) + " ran more than once");
      continue;
    }
    by_task[e.task] = &e;
    max_worker = std::max(max_worker, e.worker);
    v.makespan_ns = std::max(v.makespan_ns, e.end_ns);
  }
  for (std::size_t id = 0; id < graph.size(); ++id) {
    if (!by_task[id]) fail(graph.describe(id) + " never ran");
  }

  for (std::size_t id = 0; id < graph.size(); ++id) {
    const TraceEntry* e = by_task[id];
    if (!e) continue;
    for (const std::size_t dep : graph.task(id).deps) {
      const TraceEntry* d = by_task[dep];
      if (d && e->start_ns < d->end_ns) {
        std::ostringstream msg;
        msg << graph.describe(id) << " started at " << e->start_ns << " ns before its dependency "
            << graph.describe(dep) << " ended at " << d->end_ns << " ns";
        fail(msg.str());
      }
    }
  }

  const std::size_t n_workers = static_cast<std::size_t>(std::max(max_worker + 1, 1));
  std::vector<std::vector<const TraceEntry*>> per_worker(n_workers);
  for (const TraceEntry& e : trace.entries) {
    if (e.worker < 0) {
      fail(graph.describe(e.task) + " has a negative worker id");
      continue;
    }
    per_worker[static_cast<std::size_t>(e.worker)].push_back(&e);
  }
  for (auto& list : per_worker) {
    std::sort(list.begin(), list.end(), [](const TraceEntry* a, const TraceEntry* b) {
      return std::tie(a->start_ns, a->end_ns, a->task) < std::tie(b->start_ns, b->end_ns, b->task);
    });
    // Compare against the latest-ending earlier task so nested overlaps are caught too.
    const TraceEntry* open = nullptr;
    for (const TraceEntry* e : list) {
      if (open && e->start_ns < open->end_ns) {
        std::ostringstream msg;
        msg << "worker " << e->worker << " ran " << graph.describe(e->task) << " while "
            << graph.describe(open->task) << " was still running";
        fail(msg.str());
      }
      if (!open || e->end_ns > open->end_ns) open = e;
    }
  }

  // Phase windows and idle accounting.
  std::array<std::int64_t, kPhaseCount> lo;
  std::array<std::int64_t, kPhaseCount> hi;
  lo.fill(std::numeric_limits<std::int64_t>::max());
  hi.fill(std::numeric_limits<std::int64_t>::min());
  std::int64_t sweep_lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t sweep_hi = std::numeric_limits<std::int64_t>::min();
  for (const TraceEntry& e : trace.entries) {
    const auto p = static_cast<std::size_t>(phase_of(e.stage));
    lo[p] = std::min(lo[p], e.start_ns);
    hi[p] = std::max(hi[p], e.end_ns);
    if (e.stage == kM2M || e.stage == kM2L || e.stage == kL2L) {
      sweep_lo = std::min(sweep_lo, e.start_ns);
      sweep_hi = std::max(sweep_hi, e.end_ns);
    }
  }
  const bool has_sweep = sweep_lo < sweep_hi;
  if (has_sweep) v.sweep_window_ns = sweep_hi - sweep_lo;

  v.idle_ns.assign(n_workers, {});
  for (std::size_t w = 0; w < n_workers; ++w) {
    std::array<std::int64_t, kPhaseCount> busy{};
    std::int64_t busy_in_sweep = 0;
    for (const TraceEntry* e : per_worker[w]) {
      for (std::size_t p = 0; p < kPhaseCount; ++p) {
        if (lo[p] < hi[p]) busy[p] += overlap(e->start_ns, e->end_ns, lo[p], hi[p]);
      }
      if (has_sweep) {
        const std::int64_t inside = overlap(e->start_ns, e->end_ns, sweep_lo, sweep_hi);
        busy_in_sweep += inside;
        if (e->stage == kNearField) v.near_field_in_sweep_ns += inside;
      }
    }
    for (std::size_t p = 0; p < kPhaseCount; ++p) {
      v.idle_ns[w][p] = lo[p] < hi[p] ? std::max<std::int64_t>(0, (hi[p] - lo[p]) - busy[p]) : 0;
    }
    if (has_sweep) v.idle_in_sweep_ns += std::max<std::int64_t>(0, v.sweep_window_ns - busy_in_sweep);
  }
  return v;
}

void write_trace(std::ostream& out, const ExecutionTrace& trace) {
  out << "# stage,box,worker,start_ns,end_ns\n";
  for (const TraceEntry& e : trace.entries) {
    out << e.stage << ',' << e.box << ',' << e.worker << ',' << e.start_ns << ',' << e.end_ns << '\n';
  }
}

ExecutionTrace read_trace(std::istream& in, const TaskGraph& graph) {
  ExecutionTrace trace;
  std::string line;
  std::size_t line_no = 0;
  int max_worker = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    TraceEntry e;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    if (!(row >> e.stage >> c1 >> e.box >> c2 >> e.worker >> c3 >> e.start_ns >> c4 >> e.end_ns) || c1 != ',' ||
        c2 != ',' || c3 != ',' || c4 != ',') {
      throw std::invalid_argument("trace line " + std::to_string(line_no) + ": malformed row");
    }
    const auto id = graph.find(e.stage, e.box);
    if (!id) {
      throw std::invalid_argument("trace line " + std::to_string(line_no) + ": no task for stage " +
                                  std::to_string(e.stage) + " box " + std::to_string(e.box));
    }
    e.task = *id;
    max_worker = std::max(max_worker, e.worker);
    trace.entries.push_back(e);
  }
  trace.workers = max_worker + 1;
  return trace;
}

}  // namespace overlapfmm
