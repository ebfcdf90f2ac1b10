#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace overlapfmm {

enum class ExecutionMode { sequential, overlapped };

std::string_view to_string(ExecutionMode mode);
ExecutionMode parse_execution_mode(std::string_view text);

/// Flop rate r (flops per second) and process count P.
struct MachineModel {
  double flop_rate = 1.0;
  std::int64_t processes = 1;

  void validate() const;
};

/// Coefficients of T = a N/P + b log4 P + c N/(B P) + d N B / P for the 2D
/// regularized Biot-Savart problem, in seconds per unit.
struct CostCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  int order = 0;
};

/// a = (16t - 15)/r, b = (84 - 48t + 571t^2)/(3r), c = (128 - 48t + 844t^2)/(3r), d = 198/r.
CostCoefficients coefficients(int order, const MachineModel& machine);

double log4(double x);

/// Modeled runtime; the lower-order remainder is not modeled.
double total_time(double n, double p, double particles_per_box, const CostCoefficients& coeffs);

/// sqrt(c / d), the box population minimizing total_time.
double optimal_B(const CostCoefficients& coeffs);
double optimal_B(double c, double d);

/// Smallest B whose direct work d N B / P covers the serialized root work b L_root:
/// (b / d) P L_root / N.
double min_B_cover(double n, double p, double l_root, const CostCoefficients& coeffs);
double min_B_cover(double n, double p, const CostCoefficients& coeffs);  // L_root = log4 P

/// Smallest N/P covering the bottleneck at fixed B: (b / d) log4(P) / B.
double min_particles_per_process(double p, double particles_per_box, const CostCoefficients& coeffs);

// Flop counts of the individual FMM phases for a uniform tree with L levels.
double work_init(double n, int order);
double work_up(int levels, int order);
double work_m2l(int levels, int order);
double work_l2l(int levels, int order);
double work_direct(int levels, double particles_per_box);

/// Per-cell M2M work c1 = 4 (2 + 2t^2 + 4t(t - 1)).
double m2m_cell_work(int order);

/// The direct work written in its expanded forms; equal to work_direct for any L, B.
double work_direct_collected(int levels, double particles_per_box);
double work_direct_in_n(double n, double particles_per_box);

/// Up-sweep flops along the critical path when a level with 4^l cells runs on
/// P processes in max(4^l / P, 1) cell-steps.
double parallel_up_work(int levels, int order, double p);

struct PhaseIdle {
  double init = 0.0;
  double coarse_sweep = 0.0;
  double fine_sweep = 0.0;
  double direct = 0.0;

  double total() const { return init + coarse_sweep + fine_sweep + direct; }
};

struct TimelineReport {
  ExecutionMode mode = ExecutionMode::sequential;
  int levels = 0;              // round(log4(N / B)), at least 2
  double root_levels = 0.0;    // L_root = log4 P
  double makespan = 0.0;
  double busy = 0.0;           // process-seconds of work
  PhaseIdle idle;              // process-seconds, per phase
  double idle_to_cover = 0.0;  // idle process-seconds during the coarse levels
  double direct_in_idle = 0.0; // of which filled with near-field work
  bool bottleneck_covered = false;
  double utilization = 0.0;    // busy / (P makespan)
};

/// P-process timeline of one FMM evaluation.
///
/// Levels with fewer cells than processes (the first L_root = log4 P levels,
/// taken continuously) run on a single process group at b seconds per level
/// while the other P - 1 processes idle. The rest of the sweep, c N/(B P),
/// and the a N/P work are perfectly parallel. Each process owns d N B / P of
/// near-field work.
///
/// Sequential: the near field starts after the sweeps. Overlapped: every idle
/// process fills the coarse levels with its own near-field share; what is left
/// is rebalanced over all P processes after the sweep. The bottleneck counts
/// as covered when no process idles through the coarse levels.
TimelineReport timeline_simulate(double n, double p, double particles_per_box, int order,
                                 const MachineModel& machine, ExecutionMode mode);

struct MinSizePoint {
  double processes = 0.0;
  double min_particles_per_process = 0.0;
};

std::vector<MinSizePoint> sweep_min_size(std::span<const double> process_counts, double particles_per_box,
                                         int order);

/// Powers of 4 in [p_min, p_max].
std::vector<double> powers_of_four(double p_min, double p_max);

}  // namespace overlapfmm
