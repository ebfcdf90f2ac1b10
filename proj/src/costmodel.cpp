#include "overlapfmm/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace overlapfmm {

std::string_view to_string(ExecutionMode mode) {
  return mode == ExecutionMode::sequential ? "sequential" : "overlapped";
}

ExecutionMode parse_execution_mode(std::string_view text) {
  if (text == "sequential") return ExecutionMode::sequential;
  if (text == "overlapped") return ExecutionMode::overlapped;
  throw std::invalid_argument("unknown execution mode '" + std::string(text) +
                              "' (expected sequential or overlapped)");
}

void MachineModel::validate() const {
  if (!(flop_rate > 0.0) || !std::isfinite(flop_rate)) {
    throw std::invalid_argument("MachineModel: flop rate must be positive");
  }
  if (processes < 1) throw std::invalid_argument("MachineModel: process count must be >= 1");
}

namespace {

void check_order(int order) {
  if (order < 1) throw std::invalid_argument("expansion order must be >= 1");
}

void check_positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be positive");
}

void check_levels(int levels, int min_levels, const char* what) {
  if (levels < min_levels) {
    throw std::invalid_argument(std::string(what) + ": levels must be >= " + std::to_string(min_levels));
  }
}

double pow4(int l) { return std::ldexp(1.0, 2 * l); }

}  // namespace

CostCoefficients coefficients(int order, const MachineModel& machine) {
  check_order(order);
  machine.validate();
  const double t = order;
  const double r = machine.flop_rate;
  CostCoefficients k;
  k.a = (16.0 * t - 15.0) / r;
  k.b = (84.0 - 48.0 * t + 571.0 * t * t) / (3.0 * r);
  k.c = (128.0 - 48.0 * t + 844.0 * t * t) / (3.0 * r);
  k.d = 198.0 / r;
  k.order = order;
  return k;
}

double log4(double x) { return std::log2(x) / 2.0; }

double total_time(double n, double p, double particles_per_box, const CostCoefficients& k) {
  check_positive(n, "N");
  if (!(p >= 1.0)) throw std::invalid_argument("P must be >= 1");
  check_positive(particles_per_box, "B");
  return k.a * n / p + k.b * log4(p) + k.c * n / (particles_per_box * p) + k.d * n * particles_per_box / p;
}

double optimal_B(double c, double d) {
  check_positive(c, "c");
  check_positive(d, "d");
  return std::sqrt(c / d);
}

double optimal_B(const CostCoefficients& k) { return optimal_B(k.c, k.d); }

double min_B_cover(double n, double p, double l_root, const CostCoefficients& k) {
  check_positive(n, "N");
  if (!(p >= 1.0)) throw std::invalid_argument("P must be >= 1");
  return k.b / k.d * p * l_root / n;
}

double min_B_cover(double n, double p, const CostCoefficients& k) { return min_B_cover(n, p, log4(p), k); }

double min_particles_per_process(double p, double particles_per_box, const CostCoefficients& k) {
  if (!(p >= 1.0)) throw std::invalid_argument("P must be >= 1");
  check_positive(particles_per_box, "B");
  return k.b / k.d * log4(p) / particles_per_box;
}

double work_init(double n, int order) {
  check_order(order);
  if (n < 0) throw std::invalid_argument("N must be >= 0");
  return 2.0 + (8.0 * order + 3.0) * n;
}

double m2m_cell_work(int order) {
  const double t = order;
  return 4.0 * (2.0 + 2.0 * t * t + 4.0 * t * (t - 1.0));
}

double work_up(int levels, int order) {
  check_levels(levels, 2, "work_up");
  check_order(order);
  double cells = 0.0;
  for (int l = 2; l <= levels - 1; ++l) cells += pow4(l);
  return m2m_cell_work(order) * cells;
}

double work_m2l(int levels, int order) {
  check_levels(levels, 2, "work_m2l");
  check_order(order);
  const double t = order;
  double cells = 0.0;
  for (int l = 2; l <= levels; ++l) cells += pow4(l);
  return cells * 27.0 * (2.0 + 2.0 * t * t + 15.0 * t * t);
}

double work_l2l(int levels, int order) {
  check_levels(levels, 3, "work_l2l");
  check_order(order);
  const double t = order;
  double cells = 0.0;
  for (int l = 3; l <= levels; ++l) cells += pow4(l);
  return cells * 4.0 * (2.0 + 2.0 * t * t + 8.0 * t * t);
}

double work_direct(int levels, double b) {
  check_levels(levels, 2, "work_direct");
  if (b < 0) throw std::invalid_argument("B must be >= 0");
  const double edge = std::ldexp(1.0, levels + 2) - 8.0;
  const double interior = pow4(levels) - std::ldexp(1.0, levels + 2) + 4.0;
  return 22.0 * (4.0 * (4.0 * b * b - b) + edge * (6.0 * b * b - b) + interior * (9.0 * b * b - b));
}

double work_direct_collected(int levels, double b) {
  check_levels(levels, 2, "work_direct_collected");
  const double boxes = pow4(levels);
  return 22.0 * (9.0 * boxes * b * b - 3.0 * (std::ldexp(1.0, levels + 2) - 8.0) * b * b - 20.0 * b * b -
                 boxes * b);
}

double work_direct_in_n(double n, double b) {
  check_positive(b, "B");
  return 22.0 * (9.0 * n / b * b * b - 12.0 * std::sqrt(n / b) * b * b + 4.0 * b * b - n);
}

double parallel_up_work(int levels, int order, double p) {
  check_levels(levels, 2, "parallel_up_work");
  check_order(order);
  if (!(p >= 1.0)) throw std::invalid_argument("P must be >= 1");
  double steps = 0.0;
  for (int l = 2; l <= levels - 1; ++l) steps += std::max(pow4(l) / p, 1.0);
  return m2m_cell_work(order) * steps;
}

TimelineReport timeline_simulate(double n, double p, double b, int order, const MachineModel& machine,
                                 ExecutionMode mode) {
  check_positive(n, "N");
  check_positive(b, "B");
  if (!(p >= 1.0)) throw std::invalid_argument("P must be >= 1");
  const CostCoefficients k = coefficients(order, machine);

  TimelineReport rep;
  rep.mode = mode;
  rep.levels = std::max(2, static_cast<int>(std::lround(log4(n / b))));
  rep.root_levels = log4(p);

  const double init = k.a * n / p;
  const double coarse = k.b * rep.root_levels;  // one process group, b per level
  const double fine = k.c * n / (b * p);
  const double direct_share = k.d * n * b / p;
  const double idle_procs = p - 1.0;

  rep.busy = p * (init + fine + direct_share) + coarse;
  rep.idle_to_cover = idle_procs * coarse;

  if (mode == ExecutionMode::sequential) {
    rep.makespan = init + coarse + fine + direct_share;
    rep.idle.coarse_sweep = rep.idle_to_cover;
    rep.direct_in_idle = 0.0;
    rep.bottleneck_covered = rep.idle_to_cover == 0.0;
  } else {
    const double filled = std::min(direct_share, coarse);
    rep.direct_in_idle = idle_procs * filled;
    const double leftover = (p * direct_share - rep.direct_in_idle) / p;
    rep.makespan = init + coarse + fine + leftover;
    rep.idle.coarse_sweep = idle_procs * (coarse - filled);
    rep.bottleneck_covered = direct_share >= coarse;
  }
  rep.utilization = rep.makespan > 0.0 ? std::min(1.0, rep.busy / (p * rep.makespan)) : 1.0;
  return rep;
}

std::vector<MinSizePoint> sweep_min_size(std::span<const double> process_counts, double b, int order) {
  const CostCoefficients k = coefficients(order, MachineModel{});
  std::vector<MinSizePoint> curve;
  curve.reserve(process_counts.size());
  for (const double p : process_counts) curve.push_back({p, min_particles_per_process(p, b, k)});
  return curve;
}

std::vector<double> powers_of_four(double p_min, double p_max) {
  if (!(p_min >= 1.0) || p_max < p_min) throw std::invalid_argument("invalid process range");
  std::vector<double> out;
  for (double p = 1.0; p <= p_max; p *= 4.0) {
    if (p >= p_min) out.push_back(p);
  }
  return out;
}

}  // namespace overlapfmm
