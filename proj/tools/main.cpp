// Command-line front end: single runs, Monte Carlo batches, gain inspection,
// and scenario invariant checks over the quadfusion library.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "quadfusion/config.hpp"
#include "quadfusion/harness.hpp"

namespace qf = quadfusion;
using qf::harness::Scenario;

namespace {

Scenario load_or_demo(const std::string& path) {
  if (path.empty()) return Scenario::demo();
  return qf::config::load_scenario(path);
}

void print_stats_row(const char* name, const qf::harness::MetricStats& s) {
  std::printf("  %-14s %12.6g %12.6g %12.6g %12.6g\n", name, s.mean, s.median,
              s.p25, s.p75);
}

nlohmann::json stats_to_json(const qf::harness::MetricStats& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"p25", s.p25}, {"p75", s.p75}};
}

nlohmann::json report_to_json(const qf::harness::MseReport& rep,
                              std::uint64_t seed) {
  nlohmann::json j;
  j["runs"] = rep.runs;
  j["failed"] = rep.failed;
  j["seed"] = seed;
  const char* axes[3] = {"x", "y", "z"};
  for (int a = 0; a < 3; ++a) {
    j["estimation_mse"][axes[a]] = stats_to_json(rep.estimation[a]);
    j["path_axis_mse"][axes[a]] = stats_to_json(rep.path_axis[a]);
  }
  j["path_mse"] = stats_to_json(rep.path);
  return j;
}

int cmd_simulate(const std::string& config, std::optional<std::uint64_t> seed,
                 const std::string& output) {
  Scenario sc = load_or_demo(config);
  const std::uint64_t run_seed = seed.value_or(sc.seed);
  const qf::harness::RunLog log = qf::harness::simulate_run(sc, run_seed);
  if (!output.empty()) qf::harness::export_csv(log, output);

  std::printf("run summary\n");
  std::printf("  seed               %llu\n",
              static_cast<unsigned long long>(log.seed));
  std::printf("  steps              %zu\n", log.steps.size());
  std::printf("  position outages   %d steps\n", log.position_outage_steps);
  std::printf("  max |integrator|   %.4g\n", log.max_abs_integrator);
  if (log.failed) {
    std::fprintf(stderr, "error: run diverged at step %d\n", log.failed_step);
    return 2;
  }
  const qf::harness::RunMse mse = qf::harness::mse_metrics(log);
  std::printf("  estimation mse     x %.6g  y %.6g  z %.6g\n",
              mse.estimation(0), mse.estimation(1), mse.estimation(2));
  std::printf("  path mse (xy)      %.6g\n", mse.path);
  std::printf("  path mse per axis  x %.6g  y %.6g  z %.6g\n", mse.path_axis(0),
              mse.path_axis(1), mse.path_axis(2));
  if (!output.empty()) std::printf("  csv written to     %s\n", output.c_str());
  return 0;
}

int cmd_montecarlo(const std::string& config, std::optional<std::uint64_t> seed,
                   int runs, const std::string& json_path) {
  Scenario sc = load_or_demo(config);
  if (seed) sc.seed = *seed;
  const qf::harness::MseReport rep = qf::harness::monte_carlo(sc, runs);

  std::printf("monte carlo: %d runs (%d diverged), base seed %llu\n", rep.runs,
              rep.failed, static_cast<unsigned long long>(sc.seed));
  std::printf("  %-14s %12s %12s %12s %12s\n", "metric", "mean", "median",
              "p25", "p75");
  const char* est_names[3] = {"est mse x", "est mse y", "est mse z"};
  const char* axis_names[3] = {"path mse x", "path mse y", "path mse z"};
  for (int a = 0; a < 3; ++a) print_stats_row(est_names[a], rep.estimation[a]);
  print_stats_row("path mse (xy)", rep.path);
  for (int a = 0; a < 3; ++a) print_stats_row(axis_names[a], rep.path_axis[a]);

  if (!json_path.empty()) {
    std::ofstream f(json_path, std::ios::binary);
    if (!f) throw qf::harness::IoError("cannot open report for writing", json_path);
    f << report_to_json(rep, sc.seed).dump(2) << "\n";
    f.flush();
    if (!f) throw qf::harness::IoError("failed writing report", json_path);
    std::printf("report written to %s\n", json_path.c_str());
  }
  return 0;
}

int cmd_gains(const std::string& config) {
  Scenario sc = load_or_demo(config);
  const qf::harness::Prepared prep = qf::harness::prepare(sc);
  const Eigen::IOFormat fmt(6, 0, "  ", "\n    ", "", "", "", "");
  std::cout << "state feedback gain (4 x 12):\n    "
            << prep.gain.l_state.format(fmt) << "\n";
  std::cout << "integral gain (4 x 3):\n    "
            << prep.gain.l_integral.format(fmt) << "\n";
  std::printf("closed-loop spectral radius: %.6f\n",
              prep.gain.closed_loop_radius);
  std::printf("riccati fixed-point residual: %.3e\n", prep.gain.dare_residual);
  return 0;
}

int cmd_validate(const std::string& config) {
  Scenario sc = load_or_demo(config);
  int failures = 0;
  auto report = [&](const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] %s: %s\n", ok ? "ok" : "fail", name, detail.c_str());
    if (!ok) ++failures;
  };
  auto guarded = [&](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(name, false, e.what());
    }
  };

  guarded("riccati-gain", [&] {
    const qf::harness::Prepared prep = qf::harness::prepare(sc);
    char buf[128];
    std::snprintf(buf, sizeof buf, "radius %.4f, residual %.2e",
                  prep.gain.closed_loop_radius, prep.gain.dare_residual);
    report("riccati-gain",
           prep.gain.closed_loop_radius < 1.0 && prep.gain.dare_residual < 1e-6,
           buf);
  });

  guarded("filter-covariance", [&] {
    const qf::harness::Prepared prep = qf::harness::prepare(sc);
    qf::estimator::AugmentedEstimate est =
        qf::estimator::initial_estimate(sc.initial_mean, sc.initial_covariance);
    qf::Rng rng = qf::make_rng(12345, 0);
    std::uniform_int_distribution<int> bit(0, 1);
    double min_eig = 0.0;
    for (int k = 0; k < 200; ++k) {
      qf::sensors::MeasurementFrame frame;
      frame.mask.uwb = bit(rng) != 0;
      frame.mask.yolo = bit(rng) != 0;
      frame.mask.imu = bit(rng) != 0;
      qf::estimator::kf_step(est, prep.augmented, frame,
                             qf::model::ControlVector::Zero(),
                             Eigen::Vector3d::Zero());
      min_eig = Eigen::SelfAdjointEigenSolver<qf::Matrix>(est.p)
                    .eigenvalues()
                    .minCoeff();
      if (min_eig < -1e-9) break;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "min covariance eigenvalue %.2e after 200 steps",
                  min_eig);
    report("filter-covariance", min_eig >= -1e-9 && est.p.allFinite(), buf);
  });

  guarded("determinism", [&] {
    Scenario short_sc = sc;
    short_sc.duration = std::min(sc.duration, 2.0);
    const auto a = qf::harness::simulate_run(short_sc, sc.seed);
    const auto b = qf::harness::simulate_run(short_sc, sc.seed);
    const bool same = qf::harness::csv_string(a) == qf::harness::csv_string(b);
    report("determinism", same,
           same ? "two identical-seed runs produced identical logs"
                : "identical-seed runs disagree");
  });

  guarded("noiseless-hold", [&] {
    Scenario hold = sc;
    const Eigen::Vector2d wp0 = sc.trajectory.waypoints().front();
    hold.trajectory = qf::harness::Trajectory({wp0, wp0},
                                              sc.trajectory.altitude(), 1.0);
    hold.duration = 10.0;
    hold.sensor_mode = qf::harness::SensorMode::direct;
    hold.dropout = {};
    hold.dropout.p_uwb = hold.dropout.p_yolo = hold.dropout.p_imu = 1.0;
    hold.noise = {};
    hold.noise.uwb_range_std = hold.noise.yolo_range_std = 0.0;
    hold.noise.imu_noise_var = 0.0;
    hold.noise.direct_uwb_var = hold.noise.direct_yolo_var = 0.0;
    hold.initial_mean.setZero();
    hold.initial_mean.head<3>() = hold.trajectory.at(0.0).position;
    hold.initial_mean(qf::model::idx::x) += 0.5;
    hold.initial_covariance = qf::Spd::scaled_identity(12, 0.0);
    const auto log = qf::harness::simulate_run(hold, 1);
    double final_err = std::numeric_limits<double>::infinity();
    if (!log.failed && !log.steps.empty()) {
      final_err = (log.steps.back().truth.position -
                   hold.trajectory.at(0.0).position)
                      .norm();
    }
    char buf[96];
    std::snprintf(buf, sizeof buf,
                  "position error %.2e m ten seconds after a 0.5 m offset",
                  final_err);
    report("noiseless-hold", !log.failed && final_err < 0.05, buf);
  });

  guarded("csv-round-trip", [&] {
    Scenario short_sc = sc;
    short_sc.duration = std::min(sc.duration, 1.0);
    const auto log = qf::harness::simulate_run(short_sc, sc.seed);
    const auto path = std::filesystem::temp_directory_path() /
                      "quadfusion_validate.csv";
    qf::harness::export_csv(log, path.string());
    const auto rows = qf::harness::load_csv(path.string());
    std::filesystem::remove(path);
    const double gap = log.steps.empty()
                           ? 0.0
                           : std::abs(qf::harness::path_mse_from_rows(rows) -
                                      qf::harness::mse_metrics(log).path);
    char buf[96];
    std::snprintf(buf, sizeof buf,
                  "%zu rows, path mse round-trip gap %.2e", rows.size(), gap);
    report("csv-round-trip", rows.size() == log.steps.size() && gap <= 1e-9,
           buf);
  });

  if (failures > 0) {
    std::fprintf(stderr, "error: %d invariant check(s) failed\n", failures);
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quadrotor pose-fusion and trajectory-tracking simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "quadfusion 1.0.0");

  std::string config;
  std::uint64_t seed_value = 0;
  int runs = 20;
  std::string csv_output;
  std::string json_output;

  // No ExistingFile check here: a missing path must surface as the I/O
  // failure exit code, not as an argument-parsing error.
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("config", config,
                    "scenario JSON file (defaults to the built-in demo)");
  };

  CLI::App* sim = app.add_subcommand("simulate", "run one closed-loop simulation");
  add_config(sim);
  sim->add_option("--seed", seed_value, "override the scenario seed");
  sim->add_option("-o,--output", csv_output, "write the per-step CSV log here");

  CLI::App* mc = app.add_subcommand("montecarlo",
                                    "aggregate MSE statistics over many runs");
  add_config(mc);
  mc->add_option("--seed", seed_value, "override the scenario base seed");
  mc->add_option("-n,--runs", runs, "number of runs")
      ->check(CLI::PositiveNumber);
  mc->add_option("--json", json_output, "write a machine-readable report here");

  CLI::App* gains = app.add_subcommand("gains", "print the servo gain design");
  add_config(gains);

  CLI::App* val = app.add_subcommand("validate",
                                     "check scenario and design invariants");
  add_config(val);

  int rc = 0;
  sim->callback([&] {
    std::optional<std::uint64_t> seed;
    if (sim->count("--seed") > 0) seed = seed_value;
    rc = cmd_simulate(config, seed, csv_output);
  });
  mc->callback([&] {
    std::optional<std::uint64_t> seed;
    if (mc->count("--seed") > 0) seed = seed_value;
    rc = cmd_montecarlo(config, seed, runs, json_output);
  });
  gains->callback([&] { rc = cmd_gains(config); });
  val->callback([&] { rc = cmd_validate(config); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const qf::harness::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const qf::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
