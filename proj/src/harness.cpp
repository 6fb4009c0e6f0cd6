#include "quadfusion/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <string_view>
#include <thread>

#include "quadfusion/stats.hpp"

namespace quadfusion::harness {

namespace {

// Named random streams derived from the run seed; the order is part of the
// determinism contract.
constexpr std::uint64_t kStreamProcess = 0;
constexpr std::uint64_t kStreamAvailability = 1;
constexpr std::uint64_t kStreamUwb = 2;
constexpr std::uint64_t kStreamYolo = 3;
constexpr std::uint64_t kStreamImu = 4;
constexpr std::uint64_t kStreamInit = 5;

constexpr const char* kCsvHeader =
    "Desired X,Desired Y,Actual X,Actual Y,Est X,Est Y,Mask UWB,Mask YOLO,"
    "Mask IMU";

}  // namespace

Trajectory::Trajectory(std::vector<Eigen::Vector2d> waypoints, double altitude,
                       double speed)
    : altitude_(altitude), speed_(speed) {
  if (waypoints.size() < 2) {
    throw std::invalid_argument("trajectory needs at least 2 waypoints");
  }
  if (!(speed > 0.0)) {
    throw std::invalid_argument("trajectory speed must be positive");
  }
  if (!std::isfinite(altitude)) {
    throw std::invalid_argument("trajectory altitude must be finite");
  }
  for (const auto& w : waypoints) {
    if (!w.allFinite()) {
      throw std::invalid_argument("trajectory waypoints must be finite");
    }
  }
  // Drop zero-length segments so interpolation never divides by zero; a
  // fully-degenerate list (all points equal) is a legal hover reference.
  waypoints_.push_back(waypoints.front());
  cumulative_.push_back(0.0);
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const double len = (waypoints[i] - waypoints_.back()).norm();
    if (len > 0.0) {
      waypoints_.push_back(waypoints[i]);
      cumulative_.push_back(cumulative_.back() + len);
    }
  }
  total_ = cumulative_.back();
}

Trajectory::Reference Trajectory::at(double t) const {
  Reference ref;
  ref.velocity.setZero();
  if (waypoints_.size() < 2) {
    ref.position << waypoints_.front().x(), waypoints_.front().y(), altitude_;
    return ref;
  }
  const double s = std::clamp(t * speed_, 0.0, total_);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  const auto seg = std::clamp<std::ptrdiff_t>(it - cumulative_.begin() - 1, 0,
                                              static_cast<std::ptrdiff_t>(
                                                  waypoints_.size()) - 2);
  const Eigen::Vector2d delta = waypoints_[seg + 1] - waypoints_[seg];
  const double len = cumulative_[seg + 1] - cumulative_[seg];
  const Eigen::Vector2d xy = waypoints_[seg] + (s - cumulative_[seg]) / len * delta;
  ref.position << xy.x(), xy.y(), altitude_;
  if (t * speed_ >= 0.0 && t * speed_ < total_) {
    const Eigen::Vector2d dir = delta / len;
    ref.velocity << dir.x() * speed_, dir.y() * speed_, 0.0;
  }
  return ref;
}

Spd Scenario::default_filter_measurement() {
  Vector d(9);
  d << 0.05, 0.05, 0.05, 0.08, 0.08, 0.08, 0.01, 0.01, 0.01;
  return Spd::diagonal(d);
}

Scenario Scenario::demo() {
  Trajectory traj({{0.0, 0.0},
                   {2.5, 1.5},
                   {5.0, 2.5},
                   {7.5, 1.5},
                   {10.0, 0.0},
                   {12.5, -1.5},
                   {15.0, -2.5},
                   {17.5, -1.5},
                   {20.0, 0.0}},
                  1.5, 0.375);

  // Anchors on the corridor walls and ceiling/floor centerline, alternating
  // heights so the constellation is far from coplanar everywhere on the path.
  sensors::AnchorSet anchors({{-1.0, -4.0, 0.1},
                              {4.0, 4.0, 0.1},
                              {9.0, -4.0, 0.1},
                              {14.0, 4.0, 0.1},
                              {19.0, -4.0, 0.1},
                              {1.5, 4.0, 2.9},
                              {6.5, -4.0, 2.9},
                              {11.5, 4.0, 2.9},
                              {16.5, -4.0, 2.9},
                              {21.0, 4.0, 2.9},
                              {2.0, 0.0, 2.9},
                              {10.0, 0.0, 0.1},
                              {18.0, 0.0, 2.9}});

  Scenario sc(std::move(traj), std::move(anchors));

  // Landmarks staggered along both walls with cycled heights; the height
  // diversity keeps the visible subset usable for 3D trilateration.
  const double heights[4] = {0.3, 1.1, 1.9, 2.7};
  int cycle = 0;
  for (int xx = 0; xx <= 20; xx += 2) {
    sc.landmarks.landmarks.push_back(
        {static_cast<double>(xx), -4.0, heights[cycle++ % 4]});
    sc.landmarks.landmarks.push_back(
        {static_cast<double>(xx + 1), 4.0, heights[cycle++ % 4]});
  }
  sc.landmarks.max_range = 9.0;
  sc.landmarks.fov_half_angle = 1.25;

  sc.dropout.p_uwb = 0.9;
  sc.dropout.p_yolo = 0.7;
  sc.dropout.p_imu = 1.0;
  sc.dropout.uwb_blackout = std::make_pair(4.0, 6.0);

  Vector w_true(12);
  w_true << 1e-4, 1e-4, 1e-4, 1e-5, 1e-5, 1e-5, 4e-5, 4e-5, 4e-5, 4e-5, 4e-5,
      4e-5;
  sc.noise.process = Spd::diagonal(w_true);

  sc.initial_mean.setZero();
  sc.initial_mean.head<3>() = sc.trajectory.at(0.0).position;
  return sc;
}

void Scenario::validate() const {
  params.validate();
  landmarks.validate();
  dropout.validate();
  if (!(duration > 0.0)) {
    throw std::invalid_argument("scenario duration must be positive");
  }
  if (!(divergence_bound > 0.0)) {
    throw std::invalid_argument("divergence bound must be positive");
  }
  if (noise.process.size() != 12) {
    throw std::invalid_argument("process noise covariance must be 12 x 12");
  }
  for (double s : {noise.uwb_range_std, noise.yolo_range_std,
                   noise.imu_noise_var, noise.direct_uwb_var,
                   noise.direct_yolo_var}) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument("sensor noise levels must be nonnegative");
    }
  }
  if (filter_process.size() != 12 || filter_measurement.size() != 9) {
    throw std::invalid_argument("filter covariances must be 12 x 12 and 9 x 9");
  }
  if (initial_covariance.size() != 12) {
    throw std::invalid_argument("initial covariance must be 12 x 12");
  }
  if (!initial_mean.allFinite()) {
    throw std::invalid_argument("initial mean must be finite");
  }
  if (integrator_clamp && !(*integrator_clamp > 0.0)) {
    throw std::invalid_argument("integrator clamp must be positive");
  }
}

Prepared prepare(const Scenario& sc) {
  sc.validate();
  Prepared prep;
  prep.discrete = model::build_discrete_model(sc.params, sc.filter_process,
                                              sc.filter_measurement);
  prep.augmented = estimator::build_augmented(prep.discrete);
  prep.gain = controller::compute_gain(prep.augmented, sc.weights);
  return prep;
}

model::PlantState rk4_step(const model::PlantState& s,
                           const model::ControlInput& u,
                           const model::QuadrotorParams& p, double h) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("integration step must be positive");
  }
  auto f = [&](const model::StateVector& xv) {
    return model::nonlinear_derivative(model::PlantState::from_vector(xv), u, p);
  };
  const model::StateVector x = s.as_vector();
  const model::StateVector k1 = f(x);
  const model::StateVector k2 = f(x + 0.5 * h * k1);
  const model::StateVector k3 = f(x + 0.5 * h * k2);
  const model::StateVector k4 = f(x + h * k3);
  return model::PlantState::from_vector(x +
                                        h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

RunLog simulate_run(const Scenario& sc, std::uint64_t seed,
                    const Prepared* prep, const StepObserver& observer) {
  Prepared local;
  if (prep == nullptr) {
    local = prepare(sc);
    prep = &local;
  }

  Rng proc_rng = make_rng(seed, kStreamProcess);
  Rng avail_rng = make_rng(seed, kStreamAvailability);
  Rng uwb_rng = make_rng(seed, kStreamUwb);
  Rng yolo_rng = make_rng(seed, kStreamYolo);
  Rng imu_rng = make_rng(seed, kStreamImu);
  Rng init_rng = make_rng(seed, kStreamInit);

  const double h = sc.params.control_period;
  const int n_steps = static_cast<int>(std::llround(sc.duration / h));

  model::PlantState truth = model::PlantState::from_vector(
      sample_mvn(sc.initial_mean, sc.initial_covariance, init_rng));
  estimator::AugmentedEstimate est =
      estimator::initial_estimate(sc.initial_mean, sc.initial_covariance);
  controller::IntegratorState integ;
  integ.clamp = sc.integrator_clamp;

  const double uwb_gate = std::max(0.5, 4.0 * sc.noise.uwb_range_std);

  RunLog log;
  log.seed = seed;
  log.steps.reserve(static_cast<std::size_t>(n_steps));

  for (int k = 0; k < n_steps; ++k) {
    const double t = k * h;
    const Trajectory::Reference ref = sc.trajectory.at(t);

    sensors::AvailabilityMask mask =
        sensors::availability_step(sc.dropout, truth, avail_rng);
    if (sc.sensor_set == SensorSet::imu_uwb) mask.yolo = false;

    std::optional<Eigen::Vector3d> uwb_fix;
    std::optional<Eigen::Vector3d> yolo_fix;
    std::optional<Eigen::Vector3d> imu_att;
    if (sc.sensor_mode == SensorMode::geometric) {
      sensors::force_visibility(mask, truth, sc.landmarks);
      // Range noise is drawn every step regardless of availability so the
      // stream stays aligned across dropout patterns.
      const Vector ranges = sensors::uwb_ranges(
          truth.position, sc.anchors, sc.noise.uwb_range_std, uwb_rng);
      if (mask.uwb) {
        uwb_fix = sensors::multilaterate(ranges, sc.anchors, uwb_gate);
      }
      if (mask.yolo) {
        yolo_fix = sensors::sense_yolo(truth, sc.landmarks,
                                       sc.noise.yolo_range_std, yolo_rng);
      }
      imu_att = sensors::sense_imu(truth, sc.noise.imu_noise_var, imu_rng);
    } else {
      auto noisy = [](const Eigen::Vector3d& mean, double var, Rng& rng) {
        std::normal_distribution<double> normal(0.0, std::sqrt(var));
        Eigen::Vector3d out;
        for (int i = 0; i < 3; ++i) out(i) = mean(i) + normal(rng);
        return out;
      };
      uwb_fix = noisy(truth.position, sc.noise.direct_uwb_var, uwb_rng);
      yolo_fix = noisy(truth.position, sc.noise.direct_yolo_var, yolo_rng);
      imu_att = sensors::sense_imu(truth, sc.noise.imu_noise_var, imu_rng);
    }
    const sensors::MeasurementFrame frame =
        sensors::assemble_frame(uwb_fix, yolo_fix, imu_att, mask);

    model::StateVector x_ref = model::StateVector::Zero();
    x_ref.segment<3>(0) = ref.position;
    x_ref.segment<3>(6) = ref.velocity;
    const model::ControlVector u_cmd =
        controller::control_law(prep->gain, est.physical(), integ.value, x_ref);
    const model::ControlInput applied = model::from_deviation(u_cmd, sc.params);
    const model::ControlVector u_dev = model::to_deviation(applied, sc.params);

    StepRecord rec;
    rec.t = t;
    rec.truth = truth;
    rec.estimate = est.physical();
    rec.reference = ref.position;
    rec.control = u_dev;
    rec.mask = frame.mask;
    log.steps.push_back(rec);

    estimator::kf_step(est, prep->augmented, frame, u_dev, ref.position);
    controller::integral_update(integ, frame, ref.position);
    log.max_abs_integrator = std::max(
        log.max_abs_integrator, integ.value.cwiseAbs().maxCoeff());
    if (!(frame.mask.uwb || frame.mask.yolo)) ++log.position_outage_steps;

    if (sc.plant == PlantModel::nonlinear) {
      truth = rk4_step(truth, applied, sc.params, h);
    } else {
      truth = model::PlantState::from_vector(
          prep->discrete.phi * truth.as_vector() + prep->discrete.gamma * u_dev);
    }
    const Vector w = sample_mvn(Vector::Zero(12), sc.noise.process, proc_rng);
    truth = model::PlantState::from_vector(truth.as_vector() + w);

    if (!truth.finite() || truth.position.norm() > sc.divergence_bound) {
      log.failed = true;
      log.failed_step = k;
      break;
    }
    if (observer) observer(StepSnapshot{k, truth, est});
  }
  return log;
}

RunMse mse_metrics(const RunLog& log) {
  if (log.steps.empty()) {
    throw std::invalid_argument("cannot compute metrics of an empty log");
  }
  RunMse out;
  for (const auto& s : log.steps) {
    const Eigen::Vector3d est_err = s.truth.position - s.estimate.head<3>();
    const Eigen::Vector3d path_err = s.truth.position - s.reference;
    out.estimation += est_err.cwiseAbs2();
    out.path_axis += path_err.cwiseAbs2();
    out.path += path_err.head<2>().squaredNorm();
  }
  const double n = static_cast<double>(log.steps.size());
  out.estimation /= n;
  out.path_axis /= n;
  out.path /= n;
  return out;
}

std::vector<RunLog> run_batch(const Scenario& sc, int n_runs) {
  if (n_runs < 1) {
    throw std::invalid_argument("run count must be at least 1");
  }
  const Prepared prep = prepare(sc);
  std::vector<RunLog> logs(static_cast<std::size_t>(n_runs));

  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  const unsigned n_threads = std::min<unsigned>(
      std::max(1u, std::thread::hardware_concurrency()),
      static_cast<unsigned>(n_runs));
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (unsigned w = 0; w < n_threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n_runs; i = next.fetch_add(1)) {
        try {
          logs[static_cast<std::size_t>(i)] =
              simulate_run(sc, sc.seed + static_cast<std::uint64_t>(i), &prep);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return logs;
}

namespace {

MetricStats stats_of(std::vector<double> values) {
  MetricStats s;
  if (values.empty()) {
    s.mean = s.median = s.p25 = s.p75 =
        std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = stats::mean(values);
  s.median = stats::percentile(values, 0.50);
  s.p25 = stats::percentile(values, 0.25);
  s.p75 = stats::percentile(values, 0.75);
  return s;
}

}  // namespace

MseReport aggregate_mse(const std::vector<RunLog>& logs) {
  MseReport report;
  report.runs = static_cast<int>(logs.size());
  std::vector<RunMse> ok;
  for (const auto& log : logs) {
    if (log.failed) {
      ++report.failed;
    } else {
      ok.push_back(mse_metrics(log));
    }
  }
  auto collect = [&](auto getter) {
    std::vector<double> v;
    v.reserve(ok.size());
    for (const auto& m : ok) v.push_back(getter(m));
    return stats_of(std::move(v));
  };
  for (int a = 0; a < 3; ++a) {
    report.estimation[a] = collect([a](const RunMse& m) { return m.estimation(a); });
    report.path_axis[a] = collect([a](const RunMse& m) { return m.path_axis(a); });
  }
  report.path = collect([](const RunMse& m) { return m.path; });
  return report;
}

MseReport monte_carlo(const Scenario& sc, int n_runs) {
  return aggregate_mse(run_batch(sc, n_runs));
}

namespace {

void append_double(std::string& out, double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

std::string csv_string(const RunLog& log) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& s : log.steps) {
    append_double(out, s.reference.x());
    out += ',';
    append_double(out, s.reference.y());
    out += ',';
    append_double(out, s.truth.position.x());
    out += ',';
    append_double(out, s.truth.position.y());
    out += ',';
    append_double(out, s.estimate(0));
    out += ',';
    append_double(out, s.estimate(1));
    out += ',';
    out += s.mask.uwb ? '1' : '0';
    out += ',';
    out += s.mask.yolo ? '1' : '0';
    out += ',';
    out += s.mask.imu ? '1' : '0';
    out += '\n';
  }
  return out;
}

void export_csv(const RunLog& log, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("cannot open CSV for writing", path);
  }
  f << csv_string(log);
  f.flush();
  if (!f) {
    throw IoError("failed writing CSV", path);
  }
}

std::vector<CsvRow> load_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("cannot open CSV for reading", path);
  }
  std::string line;
  if (!std::getline(f, line) || line != kCsvHeader) {
    throw IoError("unexpected CSV header", path);
  }
  std::vector<CsvRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::array<std::string_view, 9> fields;
    std::string_view rest(line);
    for (int i = 0; i < 9; ++i) {
      const auto comma = rest.find(',');
      if ((comma == std::string_view::npos) != (i == 8)) {
        throw IoError("malformed CSV row", path);
      }
      fields[static_cast<std::size_t>(i)] = rest.substr(0, comma);
      if (comma != std::string_view::npos) rest.remove_prefix(comma + 1);
    }
    CsvRow row{};
    double* nums[6] = {&row.desired_x, &row.desired_y, &row.actual_x,
                       &row.actual_y,  &row.est_x,     &row.est_y};
    for (int i = 0; i < 6; ++i) {
      const auto& fv = fields[static_cast<std::size_t>(i)];
      const auto res = std::from_chars(fv.data(), fv.data() + fv.size(), *nums[i]);
      if (res.ec != std::errc{} || res.ptr != fv.data() + fv.size()) {
        throw IoError("malformed CSV number", path);
      }
    }
    bool* masks[3] = {&row.uwb, &row.yolo, &row.imu};
    for (int i = 0; i < 3; ++i) {
      const auto& fv = fields[static_cast<std::size_t>(6 + i)];
      if (fv == "1") {
        *masks[i] = true;
      } else if (fv == "0") {
        *masks[i] = false;
      } else {
        throw IoError("malformed CSV mask", path);
      }
    }
    rows.push_back(row);
  }
  return rows;
}

double path_mse_from_rows(const std::vector<CsvRow>& rows) {
  if (rows.empty()) {
    throw std::invalid_argument("cannot compute path MSE of an empty table");
  }
  double acc = 0.0;
  for (const auto& r : rows) {
    const double dx = r.actual_x - r.desired_x;
    const double dy = r.actual_y - r.desired_y;
    acc += dx * dx + dy * dy;
  }
  return acc / static_cast<double>(rows.size());
}

}  // namespace quadfusion::harness
