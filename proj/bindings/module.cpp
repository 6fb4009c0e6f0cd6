// Python bindings: thin wrappers over the scenario/run/report layer. All
// scenario input and output crosses the boundary as JSON text so the Python
// side needs no mirrored struct definitions.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>

#include "quadfusion/config.hpp"
#include "quadfusion/controller.hpp"
#include "quadfusion/harness.hpp"

namespace py = pybind11;
namespace qf = quadfusion;

namespace {

qf::harness::Scenario parse(const std::string& config_json) {
  return qf::config::scenario_from_json(config_json);
}

py::dict stats_dict(const qf::harness::MetricStats& s) {
  py::dict d;
  d["mean"] = s.mean;
  d["median"] = s.median;
  d["p25"] = s.p25;
  d["p75"] = s.p75;
  return d;
}

py::dict report_dict(const qf::harness::MseReport& report,
                     std::uint64_t seed) {
  static const char* axes[3] = {"x", "y", "z"};
  py::dict est, axis;
  for (int i = 0; i < 3; ++i) {
    est[axes[i]] = stats_dict(report.estimation[i]);
    axis[axes[i]] = stats_dict(report.path_axis[i]);
  }
  py::dict d;
  d["runs"] = report.runs;
  d["failed"] = report.failed;
  d["seed"] = seed;
  d["estimation_mse"] = est;
  d["path_axis_mse"] = axis;
  d["path_mse"] = stats_dict(report.path);
  return d;
}

py::list matrix_list(const qf::Matrix& m) {
  py::list rows;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    py::list row;
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.append(m(i, j));
    rows.append(row);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Closed-loop quadrotor state estimation and trajectory tracking: "
      "UWB/landmark/IMU fusion with an intermittent-measurement Kalman "
      "filter and an integral-augmented LQ servo.";

  m.def("default_scenario_json",
        [] { return qf::config::scenario_to_json(qf::harness::Scenario::demo()); },
        "Demo corridor scenario as a JSON string; edit and feed back into "
        "the other entry points.");

  m.def(
      "simulate_csv",
      [](const std::string& config_json, std::optional<std::uint64_t> seed) {
        const auto sc = parse(config_json);
        const auto log =
            qf::harness::simulate_run(sc, seed.value_or(sc.seed));
        return qf::harness::csv_string(log);
      },
      py::arg("config_json"), py::arg("seed") = std::nullopt,
      "Run one closed-loop simulation and return the per-step CSV log.");

  m.def(
      "run_metrics",
      [](const std::string& config_json, std::optional<std::uint64_t> seed) {
        const auto sc = parse(config_json);
        const auto log =
            qf::harness::simulate_run(sc, seed.value_or(sc.seed));
        const auto mse = qf::harness::mse_metrics(log);
        py::dict d;
        d["seed"] = log.seed;
        d["failed"] = log.failed;
        d["steps"] = static_cast<int>(log.steps.size());
        d["position_outage_steps"] = log.position_outage_steps;
        d["max_abs_integrator"] = log.max_abs_integrator;
        d["estimation_mse"] = py::make_tuple(mse.estimation.x(),
                                             mse.estimation.y(),
                                             mse.estimation.z());
        d["path_mse"] = mse.path;
        d["path_axis_mse"] = py::make_tuple(
            mse.path_axis.x(), mse.path_axis.y(), mse.path_axis.z());
        return d;
      },
      py::arg("config_json"), py::arg("seed") = std::nullopt,
      "Run one simulation and return summary metrics as a dict.");

  m.def(
      "monte_carlo",
      [](const std::string& config_json, int runs) {
        const auto sc = parse(config_json);
        return report_dict(qf::harness::monte_carlo(sc, runs), sc.seed);
      },
      py::arg("config_json"), py::arg("runs") = 20,
      "Batch of runs with consecutive seeds; returns aggregate MSE stats.");

  m.def(
      "gain_info",
      [](const std::string& config_json) {
        const auto sc = parse(config_json);
        const auto prep = qf::harness::prepare(sc);
        py::dict d;
        d["l_state"] = matrix_list(prep.gain.l_state);
        d["l_integral"] = matrix_list(prep.gain.l_integral);
        d["closed_loop_radius"] = prep.gain.closed_loop_radius;
        d["dare_residual"] = prep.gain.dare_residual;
        return d;
      },
      py::arg("config_json"),
      "Servo gain designed for the scenario, with the design-model "
      "closed-loop spectral radius and Riccati residual.");
}
