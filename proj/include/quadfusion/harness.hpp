#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "quadfusion/controller.hpp"
#include "quadfusion/estimator.hpp"
#include "quadfusion/model.hpp"
#include "quadfusion/numerics.hpp"
#include "quadfusion/sensors.hpp"

namespace quadfusion::harness {

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::string path)
      : std::runtime_error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Piecewise-linear waypoint path traversed at constant ground speed at a
// fixed altitude.
class Trajectory {
 public:
  Trajectory(std::vector<Eigen::Vector2d> waypoints, double altitude,
             double speed);

  struct Reference {
    Eigen::Vector3d position;
    Eigen::Vector3d velocity;
  };
  // Clamps to the endpoints; velocity drops to zero once the path ends.
  Reference at(double t) const;

  double total_length() const { return total_; }
  const std::vector<Eigen::Vector2d>& waypoints() const { return waypoints_; }
  double altitude() const { return altitude_; }
  double speed() const { return speed_; }

 private:
  std::vector<Eigen::Vector2d> waypoints_;
  double altitude_;
  double speed_;
  std::vector<double> cumulative_;  // arc length at each kept waypoint
  double total_;
};

enum class PlantModel { nonlinear, linear };
// geometric: UWB ranges are multilaterated and landmark distances
// trilaterated into position fixes. direct: fixes are truth plus iid noise,
// with no geometry in the way (used by filter-consistency checks).
enum class SensorMode { geometric, direct };
enum class SensorSet { imu_uwb, imu_uwb_yolo };

// Noise actually injected by the simulator; the filter's assumed covariances
// live in Scenario::filter_process / filter_measurement.
struct NoiseConfig {
  Spd process = Spd::scaled_identity(12, 0.0);  // discrete per-step covariance
  double uwb_range_std = 0.1;
  double yolo_range_std = 0.15;
  double imu_noise_var = 1e-3;
  double direct_uwb_var = 0.05;
  double direct_yolo_var = 0.08;
};

struct Scenario {
  model::QuadrotorParams params;
  controller::LqWeights weights;
  Trajectory trajectory;
  double duration = 60.0;  // s
  std::uint64_t seed = 1;
  SensorSet sensor_set = SensorSet::imu_uwb_yolo;
  PlantModel plant = PlantModel::nonlinear;
  SensorMode sensor_mode = SensorMode::geometric;
  sensors::AnchorSet anchors;
  sensors::LandmarkSet landmarks;
  sensors::DropoutConfig dropout;
  NoiseConfig noise;
  Spd filter_process = Spd::scaled_identity(12, 1.0);
  Spd filter_measurement = default_filter_measurement();
  model::StateVector initial_mean = model::StateVector::Zero();
  Spd initial_covariance = Spd::scaled_identity(12, 0.0);
  std::optional<double> integrator_clamp = 5.0;
  double divergence_bound = 100.0;  // m, on the position norm

  Scenario(Trajectory traj, sensors::AnchorSet anchor_set)
      : trajectory(std::move(traj)), anchors(std::move(anchor_set)) {}

  // Corridor demo: S-curve through the anchor constellation with the UWB
  // blackout band over 4 <= x <= 6.
  static Scenario demo();
  static Spd default_filter_measurement();
  void validate() const;
};

struct StepRecord {
  double t = 0.0;
  model::PlantState truth;                // state at the step start
  Eigen::Matrix<double, 12, 1> estimate;  // one-step-ahead estimate for it
  Eigen::Vector3d reference;
  model::ControlVector control;           // deviation input actually applied
  sensors::AvailabilityMask mask;         // after geometric gating
};

struct RunLog {
  std::vector<StepRecord> steps;
  bool failed = false;
  int failed_step = -1;
  int position_outage_steps = 0;  // steps with neither position fix
  double max_abs_integrator = 0.0;
  std::uint64_t seed = 0;
};

// Everything derivable from the scenario before stepping.
struct Prepared {
  model::DiscreteModel discrete;
  estimator::AugmentedModel augmented;
  controller::ServoGain gain;
};
Prepared prepare(const Scenario& sc);

// Classical RK4 over the nonlinear dynamics; noise is the caller's business.
model::PlantState rk4_step(const model::PlantState& s,
                           const model::ControlInput& u,
                           const model::QuadrotorParams& p, double h);

// Fired after each step with the propagated truth and the filter state that
// now predicts it (the pairing consistency tests need).
struct StepSnapshot {
  int step;
  const model::PlantState& truth;
  const estimator::AugmentedEstimate& estimate;
};
using StepObserver = std::function<void(const StepSnapshot&)>;

// Closed-loop run: reference -> availability -> sensing -> control from the
// one-step-ahead estimate -> filter -> integrator -> plant. Deterministic in
// (scenario, seed); divergence marks the log failed instead of throwing.
RunLog simulate_run(const Scenario& sc, std::uint64_t seed,
                    const Prepared* prep = nullptr,
                    const StepObserver& observer = {});

struct RunMse {
  Eigen::Vector3d estimation = Eigen::Vector3d::Zero();  // per position axis
  double path = 0.0;                     // horizontal distance^2 to the plan
  Eigen::Vector3d path_axis = Eigen::Vector3d::Zero();   // includes altitude
};
RunMse mse_metrics(const RunLog& log);

struct MetricStats {
  double mean = 0.0;
  double median = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
};

struct MseReport {
  MetricStats estimation[3];
  MetricStats path;
  MetricStats path_axis[3];
  int runs = 0;
  int failed = 0;  // excluded from the statistics
};

// Per-run seeds are scenario.seed + run index, so equal-seed scenarios yield
// matched pairs. Runs execute concurrently; each owns its plant, filter,
// integrator, and streams.
std::vector<RunLog> run_batch(const Scenario& sc, int n_runs);
MseReport aggregate_mse(const std::vector<RunLog>& logs);
MseReport monte_carlo(const Scenario& sc, int n_runs);

// Columns: Desired X,Desired Y,Actual X,Actual Y,Est X,Est Y,
// Mask UWB,Mask YOLO,Mask IMU. Shortest-round-trip doubles, '.' decimal
// point, one row per step.
std::string csv_string(const RunLog& log);
void export_csv(const RunLog& log, const std::string& path);

struct CsvRow {
  double desired_x, desired_y, actual_x, actual_y, est_x, est_y;
  bool uwb, yolo, imu;
};
std::vector<CsvRow> load_csv(const std::string& path);
double path_mse_from_rows(const std::vector<CsvRow>& rows);

}  // namespace quadfusion::harness
