#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "overlapfmm/overlapfmm.hpp"

namespace py = pybind11;
using namespace overlapfmm;

namespace {

using PositionArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Particle> to_particles(const PositionArray& positions, const PositionArray& circulations) {
  if (positions.ndim() != 2 || positions.shape(1) != 2) throw py::value_error("positions must have shape (N, 2)");
  if (circulations.ndim() != 1 || circulations.shape(0) != positions.shape(0)) {
    throw py::value_error("circulations must have shape (N,)");
  }
  const auto pos = positions.unchecked<2>();
  const auto gam = circulations.unchecked<1>();
  std::vector<Particle> out(static_cast<std::size_t>(positions.shape(0)));
  for (py::ssize_t i = 0; i < positions.shape(0); ++i) {
    out[static_cast<std::size_t>(i)] = {Complex(pos(i, 0), pos(i, 1)), gam(i)};
  }
  return out;
}

py::array_t<double> to_array(const std::vector<Velocity>& vs) {
  py::array_t<double> out({static_cast<py::ssize_t>(vs.size()), py::ssize_t{2}});
  auto o = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < vs.size(); ++i) {
    o(static_cast<py::ssize_t>(i), 0) = vs[i].u;
    o(static_cast<py::ssize_t>(i), 1) = vs[i].v;
  }
  return out;
}

py::tuple from_particles(const std::vector<Particle>& ps) {
  py::array_t<double> pos({static_cast<py::ssize_t>(ps.size()), py::ssize_t{2}});
  py::array_t<double> gam(static_cast<py::ssize_t>(ps.size()));
  auto p = pos.mutable_unchecked<2>();
  auto g = gam.mutable_unchecked<1>();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto k = static_cast<py::ssize_t>(i);
    p(k, 0) = ps[i].position.real();
    p(k, 1) = ps[i].position.imag();
    g(k) = ps[i].circulation;
  }
  return py::make_tuple(pos, gam);
}

py::dict report_dict(const StageReport& r) {
  py::dict stages;
  for (int s = 1; s <= kStageCount; ++s) {
    py::dict d;
    d["name"] = std::string(stage_name(s));
    d["tasks"] = r.stage(s).tasks;
    d["flops"] = r.stage(s).flops;
    d["seconds"] = r.stage(s).seconds;
    stages[py::int_(s)] = d;
  }
  py::dict out;
  out["stages"] = stages;
  out["near_pair_evaluations"] = r.near_pair_evaluations;
  out["particles"] = r.particles;
  out["levels"] = r.levels;
  out["order"] = r.order;
  out["uniform_boxes"] = r.uniform_boxes;
  return out;
}

py::dict timeline_dict(const TimelineReport& r) {
  py::dict idle;
  idle["init"] = r.idle.init;
  idle["coarse_sweep"] = r.idle.coarse_sweep;
  idle["fine_sweep"] = r.idle.fine_sweep;
  idle["direct"] = r.idle.direct;
  py::dict out;
  out["mode"] = std::string(to_string(r.mode));
  out["levels"] = r.levels;
  out["root_levels"] = r.root_levels;
  out["makespan"] = r.makespan;
  out["busy"] = r.busy;
  out["idle"] = idle;
  out["idle_to_cover"] = r.idle_to_cover;
  out["direct_in_idle"] = r.direct_in_idle;
  out["bottleneck_covered"] = r.bottleneck_covered;
  out["utilization"] = r.utilization;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Overlapped FMM for the regularized 2D Biot-Savart kernel";

  m.def(
      "direct_sum",
      [](const PositionArray& positions, const PositionArray& circulations, double sigma) {
        const auto ps = to_particles(positions, circulations);
        const KernelParams params(sigma);
        std::vector<Velocity> v;
        {
          py::gil_scoped_release release;
          v = direct_sum_all(ps, params);
        }
        return to_array(v);
      },
      py::arg("positions"), py::arg("circulations"), py::arg("sigma"),
      "O(N^2) regularized Biot-Savart velocities, shape (N, 2).");

  m.def(
      "compute_velocities",
      [](const PositionArray& positions, const PositionArray& circulations, int levels, int order,
         std::optional<double> sigma, const std::string& mode, int workers) {
        const auto ps = to_particles(positions, circulations);
        FmmConfig config;
        config.levels = levels;
        config.order = order;
        config.sigma = sigma;
        config.mode = parse_execution_mode(mode);
        config.workers = workers;
        config.validate();
        ExecutionResult result;
        {
          py::gil_scoped_release release;
          (void)bin_particles(Quadtree(levels), ps);
          result = execute(build_dag(build_tree(levels)), ps, config);
        }
        return py::make_tuple(to_array(result.velocities), report_dict(result.report));
      },
      py::arg("positions"), py::arg("circulations"), py::arg("levels") = 3, py::arg("order") = kDefaultOrder,
      py::arg("sigma") = py::none(), py::arg("mode") = "sequential", py::arg("workers") = 1,
      "FMM velocities on the task-graph executor. Returns (velocities, report).");

  m.def("lattice_particles", [](int levels, int per_box) { return from_particles(lattice_particles(levels, per_box)); },
        py::arg("levels"), py::arg("per_box"), "Exactly per_box particles in each finest box: (positions, circulations).");
  m.def("random_particles",
        [](std::size_t n, std::uint64_t seed) { return from_particles(random_particles(n, seed)); }, py::arg("n"),
        py::arg("seed"), "Uniform random particles: (positions, circulations).");

  m.def(
      "coefficients",
      [](int order, double rate) {
        const CostCoefficients k = coefficients(order, MachineModel{rate, 1});
        py::dict d;
        d["a"] = k.a;
        d["b"] = k.b;
        d["c"] = k.c;
        d["d"] = k.d;
        d["order"] = k.order;
        return d;
      },
      py::arg("order") = kDefaultOrder, py::arg("rate") = 1.0);
  m.def(
      "total_time",
      [](double n, double p, double b, int order, double rate) {
        return total_time(n, p, b, coefficients(order, MachineModel{rate, 1}));
      },
      py::arg("n"), py::arg("p"), py::arg("b"), py::arg("order") = kDefaultOrder, py::arg("rate") = 1.0);
  m.def(
      "optimal_b", [](int order) { return optimal_B(coefficients(order, MachineModel{})); },
      py::arg("order") = kDefaultOrder);
  m.def(
      "min_b_cover",
      [](double n, double p, int order, std::optional<double> l_root) {
        const auto k = coefficients(order, MachineModel{});
        return min_B_cover(n, p, l_root.value_or(log4(p)), k);
      },
      py::arg("n"), py::arg("p"), py::arg("order") = kDefaultOrder, py::arg("l_root") = py::none());
  m.def(
      "min_particles_per_process",
      [](double p, double b, int order) { return min_particles_per_process(p, b, coefficients(order, MachineModel{})); },
      py::arg("p"), py::arg("b"), py::arg("order") = kDefaultOrder);
  m.def("work_init", &work_init, py::arg("n"), py::arg("order"));
  m.def("work_direct", &work_direct, py::arg("levels"), py::arg("b"));
  m.def(
      "timeline_simulate",
      [](double n, double p, double b, int order, double rate, const std::string& mode) {
        return timeline_dict(timeline_simulate(n, p, b, order, MachineModel{rate, 1}, parse_execution_mode(mode)));
      },
      py::arg("n"), py::arg("p"), py::arg("b"), py::arg("order") = kDefaultOrder, py::arg("rate") = 1.0,
      py::arg("mode") = "overlapped");
  m.def(
      "sweep_min_size",
      [](const std::vector<double>& ps, double b, int order) {
        std::vector<std::pair<double, double>> out;
        for (const auto& pt : sweep_min_size(ps, b, order)) out.emplace_back(pt.processes, pt.min_particles_per_process);
        return out;
      },
      py::arg("p_values"), py::arg("b"), py::arg("order") = kDefaultOrder);
  m.def("powers_of_four", &powers_of_four, py::arg("p_min"), py::arg("p_max"));

#ifdef VERSION_INFO
#define OFMM_STR_(x) #x
#define OFMM_STR(x) OFMM_STR_(x)
  m.attr("__version__") = OFMM_STR(VERSION_INFO);
#else
  m.attr("__version__") = "dev";
#endif
}
