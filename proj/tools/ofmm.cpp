// ofmm: FMM runs, oracle comparisons, cost-model queries and timeline simulation.
//
// Exit codes: 0 success, 1 internal invariant failure, 2 user input error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "overlapfmm/overlapfmm.hpp"

namespace ofmm = overlapfmm;

namespace {

constexpr int kExitInvariant = 1;
constexpr int kExitUser = 2;

class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string full(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

// Ordered key=value document.
class Document {
 public:
  explicit Document(std::string command) { add("command", std::move(command)); }

  void add(const std::string& key, std::string value) { rows_.emplace_back(key, std::move(value)); }
  void add(const std::string& key, double value) { add(key, full(value)); }
  void add(const std::string& key, long long value) { add(key, std::to_string(value)); }
  void add(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
  void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }

  void write(std::ostream& out, const char* prefix = "") const {
    for (const auto& [k, v] : rows_) out << prefix << k << '=' << v << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot open '" + path + "' for writing");
  return out;
}

void emit(const Document& doc, const std::string& path) {
  if (path.empty() || path == "-") {
    doc.write(std::cout);
    return;
  }
  auto out = open_output(path);
  doc.write(out);
}

std::int64_t as_count(double x, const char* name) {
  if (!(x >= 0.0) || x != std::floor(x) || x > 9.0e15) {
    throw UserError(std::string(name) + " must be a non-negative integer, got " + full(x));
  }
  return static_cast<std::int64_t>(x);
}

struct SourceOptions {
  std::string gen;
  std::string input;
  double n = 0.0;
  std::optional<std::uint64_t> seed;
};

struct FmmOptions {
  int levels = 3;
  int order = ofmm::kDefaultOrder;
  std::optional<double> sigma;
  std::string mode = "sequential";
  int workers = 1;
};

void add_source_options(CLI::App* cmd, SourceOptions& s) {
  auto* gen = cmd->add_option("--gen", s.gen, "particle generator")->check(CLI::IsMember({"lattice", "random"}));
  auto* input = cmd->add_option("--input", s.input, "particle file with rows x,y,gamma");
  gen->excludes(input);
  input->excludes(gen);
  cmd->add_option("--n", s.n, "particle count for --gen (accepts 1e6)");
  cmd->add_option("--seed", s.seed, "seed for --gen random");
}

void add_fmm_options(CLI::App* cmd, FmmOptions& f) {
  cmd->add_option("--levels", f.levels, "tree depth L")->capture_default_str();
  cmd->add_option("--order", f.order, "expansion order t")->capture_default_str();
  cmd->add_option("--sigma", f.sigma, "core radius (default: finest box width / 10)");
  cmd->add_option("--mode", f.mode, "execution mode")
      ->check(CLI::IsMember({"sequential", "overlapped"}))
      ->capture_default_str();
  cmd->add_option("--workers", f.workers, "worker threads")->capture_default_str();
}

std::vector<ofmm::Particle> load_particles(const SourceOptions& s, int levels) {
  if (s.gen.empty() && s.input.empty()) throw UserError("exactly one of --gen or --input is required");
  if (!s.input.empty()) {
    if (s.seed) throw UserError("--seed applies to --gen random only");
    std::ifstream in(s.input);
    if (!in) throw UserError("cannot open particle file '" + s.input + "'");
    return ofmm::read_particles(in);
  }
  const std::int64_t n = as_count(s.n, "--n");
  if (n == 0) throw UserError("--n is required with --gen");
  if (s.gen == "random") {
    if (!s.seed) throw UserError("--gen random requires --seed");
    return ofmm::random_particles(static_cast<std::size_t>(n), *s.seed);
  }
  if (s.seed) throw UserError("--seed applies to --gen random only");
  if (levels < 0 || levels > 15) throw UserError("--levels out of range");
  const std::int64_t boxes = std::int64_t{1} << (2 * levels);
  if (n % boxes != 0) {
    throw UserError("--gen lattice needs --n divisible by 4^L = " + std::to_string(boxes));
  }
  return ofmm::lattice_particles(levels, static_cast<int>(n / boxes));
}

ofmm::FmmConfig make_config(const FmmOptions& f) {
  ofmm::FmmConfig c;
  c.levels = f.levels;
  c.order = f.order;
  c.sigma = f.sigma;
  c.mode = ofmm::parse_execution_mode(f.mode);
  c.workers = f.workers;
  c.validate();
  return c;
}

void describe_source(Document& doc, const SourceOptions& s, std::size_t n) {
  if (!s.input.empty()) {
    doc.add("input", s.input);
  } else {
    doc.add("generator", s.gen);
    if (s.seed) doc.add("seed", static_cast<std::uint64_t>(*s.seed));
  }
  doc.add("particles", static_cast<std::uint64_t>(n));
}

void describe_config(Document& doc, const ofmm::FmmConfig& c) {
  doc.add("levels", c.levels);
  doc.add("order", c.order);
  doc.add("sigma", c.resolved_sigma());
  doc.add("mode", std::string(ofmm::to_string(c.mode)));
  doc.add("workers", c.workers);
}

void describe_stages(Document& doc, const ofmm::StageReport& r) {
  for (int s = 1; s <= ofmm::kStageCount; ++s) {
    const std::string key = "stage" + std::to_string(s) + "." + std::string(ofmm::stage_name(s));
    doc.add(key + ".tasks", r.stage(s).tasks);
    doc.add(key + ".flops", r.stage(s).flops);
  }
  doc.add("near_pair_evaluations", r.near_pair_evaluations);
  doc.add("uniform_boxes", r.uniform_boxes);
  const ofmm::FlopReport flops = ofmm::flop_report(r);
  for (const auto& row : flops.rows) {
    const std::string key = "flops.stage" + std::to_string(row.stage);
    if (row.model) doc.add(key + ".model", *row.model);
    doc.add(key + ".reconciled", row.reconciled);
    if (row.reconciled) doc.add(key + ".mismatch", row.mismatch);
  }
  doc.add("flops.any_mismatch", flops.any_mismatch);
}

struct RunOptions {
  SourceOptions source;
  FmmOptions fmm;
  std::string output;
  std::string trace;
  std::string report;
  bool timings = false;
};

int cmd_run(const RunOptions& o) {
  const ofmm::FmmConfig config = make_config(o.fmm);
  const auto particles = load_particles(o.source, config.levels);
  // Surface out-of-domain input as a user error before any task runs.
  (void)ofmm::bin_particles(ofmm::Quadtree(config.levels), particles);
  const ofmm::TaskGraph graph = ofmm::build_dag(ofmm::build_tree(config.levels));
  const ofmm::ExecutionResult result = ofmm::execute(graph, particles, config);

  Document doc("run");
  describe_source(doc, o.source, particles.size());
  describe_config(doc, config);
  doc.add("output", o.output);
  {
    auto out = open_output(o.output);
    doc.write(out, "# ");
    ofmm::write_velocities(out, result.velocities);
  }
  describe_stages(doc, result.report);

  std::string trace_path = o.trace;
  if (trace_path.empty() && config.workers > 1) trace_path = o.output + ".trace.csv";
  if (!trace_path.empty()) {
    const ofmm::TraceValidation v = ofmm::validate_trace(graph, result.trace);
    auto out = open_output(trace_path);
    ofmm::write_trace(out, result.trace);
    doc.add("trace", trace_path);
    doc.add("trace.valid", v.ok);
    if (o.timings) {
      doc.add("trace.makespan_ns", static_cast<long long>(v.makespan_ns));
      doc.add("trace.near_field_in_sweep_ns", static_cast<long long>(v.near_field_in_sweep_ns));
      doc.add("trace.idle_in_sweep_ns", static_cast<long long>(v.idle_in_sweep_ns));
    }
    if (!v.ok) {
      for (const auto& msg : v.violations) std::cerr << "trace violation: " << msg << '\n';
      emit(doc, o.report);
      return kExitInvariant;
    }
  }
  if (o.timings) {
    doc.add("wall_seconds", result.wall_seconds);
    for (int s = 1; s <= ofmm::kStageCount; ++s) {
      doc.add("stage" + std::to_string(s) + ".seconds", result.report.stage(s).seconds);
    }
  }
  emit(doc, o.report);
  return 0;
}

struct OracleOptions {
  SourceOptions source;
  FmmOptions fmm;
  bool force = false;
  std::string output;
};

constexpr std::int64_t kOracleLimit = 100000;

int cmd_oracle(const OracleOptions& o) {
  const ofmm::FmmConfig config = make_config(o.fmm);
  const auto particles = load_particles(o.source, config.levels);
  if (static_cast<std::int64_t>(particles.size()) > kOracleLimit && !o.force) {
    throw UserError("the direct sum is quadratic in N; N = " + std::to_string(particles.size()) + " exceeds " +
                    std::to_string(kOracleLimit) + " (pass --force to run anyway)");
  }
  const ofmm::FmmResult fmm = ofmm::compute_velocities(particles, config);
  const auto exact = ofmm::direct_sum_all(particles, ofmm::KernelParams(config.resolved_sigma()));

  double max_rel = 0.0, diff2 = 0.0, ref2 = 0.0, max_ref = 0.0;
  for (const auto& v : exact) max_ref = std::max(max_ref, v.norm());
  // Pointwise relative error, guarded against vanishing reference values.
  const double floor = 1e-12 * max_ref;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    const double d = (fmm.velocities[i] - exact[i]).norm();
    const double e = exact[i].norm();
    diff2 += d * d;
    ref2 += e * e;
    if (d > 0.0) max_rel = std::max(max_rel, d / std::max(e, floor));
  }

  Document doc("oracle");
  describe_source(doc, o.source, particles.size());
  describe_config(doc, config);
  doc.add("max_relative_error", max_rel);
  doc.add("rms_relative_error", ref2 > 0.0 ? std::sqrt(diff2 / ref2) : std::sqrt(diff2));
  emit(doc, o.output);
  return 0;
}

struct ModelOptions {
  std::string query;
  int order = ofmm::kDefaultOrder;
  double rate = 1.0;
  double n = 1e6;
  double p = 1e4;
  std::optional<double> l_root;
  double b = 18.0;
  std::string output;
};

int cmd_model(const ModelOptions& o) {
  const std::int64_t p = as_count(o.p, "--p");
  const ofmm::MachineModel machine{o.rate, std::max<std::int64_t>(p, 1)};
  const ofmm::CostCoefficients k = ofmm::coefficients(o.order, machine);
  Document doc("model " + o.query);
  doc.add("order", o.order);
  doc.add("rate", o.rate);
  if (o.query == "coeffs") {
    for (const auto& [name, value] : {std::pair{"a", k.a}, {"b", k.b}, {"c", k.c}, {"d", k.d}}) {
      doc.add(name, value);
      doc.add(std::string(name) + ".rounded", fixed(value, 2));
    }
    doc.add("b_over_d", k.b / k.d);
    doc.add("b_over_d.rounded", fixed(k.b / k.d, 2));
  } else if (o.query == "bopt") {
    const double b = ofmm::optimal_B(k);
    doc.add("b_opt", b);
    doc.add("b_opt.rounded", fixed(b, 2));
    doc.add("b_opt.integer", static_cast<long long>(std::lround(b)));
  } else if (o.query == "cover") {
    if (p < 1) throw UserError("--p must be >= 1");
    const double l_root = o.l_root.value_or(ofmm::log4(o.p));
    doc.add("n", o.n);
    doc.add("p", o.p);
    doc.add("l_root", l_root);
    const double b = ofmm::min_B_cover(o.n, o.p, l_root, k);
    doc.add("min_b_cover", b);
    doc.add("min_b_cover.rounded", fixed(b, 2));
  } else {
    if (p < 1) throw UserError("--p must be >= 1");
    doc.add("p", o.p);
    doc.add("b", o.b);
    const double m = ofmm::min_particles_per_process(o.p, o.b, k);
    doc.add("coefficient_per_log4p", k.b / k.d / o.b);
    doc.add("coefficient_per_log4p.rounded", fixed(k.b / k.d / o.b, 2));
    doc.add("min_particles_per_process", m);
    doc.add("min_particles_per_process.rounded", fixed(m, 1));
  }
  emit(doc, o.output);
  return 0;
}

struct SweepOptions {
  double p_min = 4.0;
  double p_max = 1048576.0;
  double b = 18.0;
  int order = ofmm::kDefaultOrder;
  std::string output;
};

int cmd_sweep(const SweepOptions& o) {
  if (o.order < 1) throw UserError("--order must be >= 1");
  if (!(o.b > 0.0)) throw UserError("--b must be positive");
  const auto ps = ofmm::powers_of_four(o.p_min, o.p_max);
  if (ps.empty()) throw UserError("no power of 4 lies in [" + full(o.p_min) + ", " + full(o.p_max) + "]");
  const auto curve = ofmm::sweep_min_size(ps, o.b, o.order);

  Document doc("sweep");
  doc.add("p_min", o.p_min);
  doc.add("p_max", o.p_max);
  doc.add("b", o.b);
  doc.add("order", o.order);
  doc.add("rows", static_cast<std::uint64_t>(curve.size()));
  std::ostringstream body;
  doc.write(body, "# ");
  body << "P,min_particles_per_process\n";
  for (const auto& pt : curve) body << full(pt.processes) << ',' << full(pt.min_particles_per_process) << '\n';
  if (o.output.empty() || o.output == "-") {
    std::cout << body.str();
  } else {
    auto out = open_output(o.output);
    out << body.str();
  }
  return 0;
}

struct SimulateOptions {
  double n = 1e6;
  double p = 1e4;
  double b = 18.0;
  int order = ofmm::kDefaultOrder;
  double rate = 1.0;
  std::string mode = "overlapped";
  std::string output;
};

int cmd_simulate(const SimulateOptions& o) {
  if (!(o.p >= 1.0)) throw UserError("--p must be >= 1");
  const ofmm::MachineModel machine{o.rate, as_count(o.p, "--p")};
  const auto r = ofmm::timeline_simulate(o.n, o.p, o.b, o.order, machine, ofmm::parse_execution_mode(o.mode));
  Document doc("simulate");
  doc.add("n", o.n);
  doc.add("p", o.p);
  doc.add("b", o.b);
  doc.add("order", o.order);
  doc.add("rate", o.rate);
  doc.add("mode", o.mode);
  doc.add("levels", r.levels);
  doc.add("root_levels", r.root_levels);
  doc.add("makespan", r.makespan);
  doc.add("busy", r.busy);
  doc.add("idle.init", r.idle.init);
  doc.add("idle.coarse_sweep", r.idle.coarse_sweep);
  doc.add("idle.fine_sweep", r.idle.fine_sweep);
  doc.add("idle.direct", r.idle.direct);
  doc.add("idle.total", r.idle.total());
  doc.add("idle_to_cover", r.idle_to_cover);
  doc.add("direct_in_idle", r.direct_in_idle);
  doc.add("utilization", r.utilization);
  doc.add("min_b_cover", ofmm::min_B_cover(o.n, o.p, ofmm::coefficients(o.order, machine)));
  doc.add("bottleneck_covered", r.bottleneck_covered);
  emit(doc, o.output);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Overlapped FMM for the regularized 2D Biot-Savart kernel"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "evaluate velocities with the task-graph executor");
  add_source_options(run_cmd, run.source);
  add_fmm_options(run_cmd, run.fmm);
  run_cmd->add_option("--output", run.output, "velocity file (rows index,u,v)")->required();
  run_cmd->add_option("--trace", run.trace, "trace file (default <output>.trace.csv when workers > 1)");
  run_cmd->add_option("--report", run.report, "report file (default stdout)");
  run_cmd->add_flag("--timings", run.timings, "include wall-clock timings in the report");

  OracleOptions oracle;
  auto* oracle_cmd = app.add_subcommand("oracle", "compare the FMM against the direct sum");
  add_source_options(oracle_cmd, oracle.source);
  add_fmm_options(oracle_cmd, oracle.fmm);
  oracle_cmd->add_flag("--force", oracle.force, "allow N above the quadratic-cost guard");
  oracle_cmd->add_option("--output", oracle.output, "report file (default stdout)");

  ModelOptions model;
  auto* model_cmd = app.add_subcommand("model", "cost-model queries");
  model_cmd->add_option("query", model.query, "coeffs | bopt | cover | minsize")
      ->required()
      ->check(CLI::IsMember({"coeffs", "bopt", "cover", "minsize"}));
  model_cmd->add_option("--order", model.order)->capture_default_str();
  model_cmd->add_option("--rate", model.rate, "flop rate r")->capture_default_str();
  model_cmd->add_option("--n", model.n)->capture_default_str();
  model_cmd->add_option("--p", model.p)->capture_default_str();
  model_cmd->add_option("--lroot", model.l_root, "root levels (default log4 P)");
  model_cmd->add_option("--b", model.b, "particles per box")->capture_default_str();
  model_cmd->add_option("--output", model.output);

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "minimum N/P without a bottleneck at powers of 4");
  sweep_cmd->add_option("--pmin", sweep.p_min)->capture_default_str();
  sweep_cmd->add_option("--pmax", sweep.p_max)->capture_default_str();
  sweep_cmd->add_option("--b", sweep.b)->capture_default_str();
  sweep_cmd->add_option("--order", sweep.order)->capture_default_str();
  sweep_cmd->add_option("--output", sweep.output);

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "P-process timeline of one evaluation");
  sim_cmd->add_option("--n", sim.n)->capture_default_str();
  sim_cmd->add_option("--p", sim.p)->capture_default_str();
  sim_cmd->add_option("--b", sim.b)->capture_default_str();
  sim_cmd->add_option("--order", sim.order)->capture_default_str();
  sim_cmd->add_option("--rate", sim.rate)->capture_default_str();
  sim_cmd->add_option("--mode", sim.mode)
      ->check(CLI::IsMember({"sequential", "overlapped"}))
      ->capture_default_str();
  sim_cmd->add_option("--output", sim.output);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUser;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*oracle_cmd) return cmd_oracle(oracle);
    if (*model_cmd) return cmd_model(model);
    if (*sweep_cmd) return cmd_sweep(sweep);
    if (*sim_cmd) return cmd_simulate(sim);
  } catch (const ofmm::ParseError& e) {
    std::cerr << "error: " << (run.source.input.empty() ? oracle.source.input : run.source.input) << ": "
              << e.what() << '\n';
    return kExitUser;
  } catch (const ofmm::InvariantViolation& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const ofmm::ExecutionAborted& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const ofmm::OutOfDomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInvariant;
  }
  return kExitUser;
}
