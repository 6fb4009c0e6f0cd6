#include "quadfusion/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace quadfusion::config {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const char* where,
                  std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw std::invalid_argument(std::string("unknown key \"") + key +
                                  "\" in " + where);
    }
  }
}

Spd parse_covariance(const json& j, Eigen::Index n, const char* where) {
  if (j.is_number()) {
    return Spd::scaled_identity(n, j.get<double>());
  }
  if (!j.is_array() || j.empty()) {
    throw std::invalid_argument(std::string(where) +
                                ": covariance must be a scalar, an array, or "
                                "an array of arrays");
  }
  if (j.front().is_array()) {
    Matrix m(static_cast<Eigen::Index>(j.size()), n);
    if (m.rows() != n) {
      throw std::invalid_argument(std::string(where) + ": wrong matrix size");
    }
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& row = j[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
        throw std::invalid_argument(std::string(where) + ": wrong row size");
      }
      for (Eigen::Index c = 0; c < n; ++c) {
        m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
      }
    }
    // Record definiteness: strictly positive inputs must remain usable as
    // control weights, which require a pd matrix.
    try {
      return Spd::pd(m);
    } catch (const std::invalid_argument&) {
      return Spd::psd(m);
    }
  }
  if (static_cast<Eigen::Index>(j.size()) != n) {
    throw std::invalid_argument(std::string(where) + ": wrong diagonal size");
  }
  Vector d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  return Spd::diagonal(d);
}

json covariance_to_json(const Matrix& m) {
  bool diagonal = true;
  for (Eigen::Index r = 0; r < m.rows() && diagonal; ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (r != c && m(r, c) != 0.0) {
        diagonal = false;
        break;
      }
    }
  }
  json out = json::array();
  if (diagonal) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(m(i, i));
  } else {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      out.push_back(row);
    }
  }
  return out;
}

std::vector<Eigen::Vector3d> parse_points(const json& j, const char* where) {
  std::vector<Eigen::Vector3d> out;
  if (!j.is_array()) {
    throw std::invalid_argument(std::string(where) +
                                ": expected an array of [x, y, z] triples");
  }
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 3) {
      throw std::invalid_argument(std::string(where) +
                                  ": each point needs exactly 3 coordinates");
    }
    out.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
  }
  return out;
}

void overlay(harness::Scenario& sc, const json& j) {
  require_keys(j, "scenario",
               {"params", "weights", "trajectory", "duration", "seed",
                "sensor_set", "plant", "sensor_mode", "anchors", "landmarks",
                "dropout", "noise", "filter", "initial", "integrator_clamp",
                "divergence_bound"});

  if (j.contains("params")) {
    const json& p = j["params"];
    require_keys(p, "params",
                 {"mass", "gravity", "inertia", "control_period", "max_thrust"});
    if (p.contains("mass")) sc.params.mass = p["mass"].get<double>();
    if (p.contains("gravity")) sc.params.gravity = p["gravity"].get<double>();
    if (p.contains("inertia")) {
      const json& in = p["inertia"];
      if (!in.is_array() || in.size() != 3) {
        throw std::invalid_argument("params.inertia must be [Ix, Iy, Iz]");
      }
      sc.params.inertia_x = in[0].get<double>();
      sc.params.inertia_y = in[1].get<double>();
      sc.params.inertia_z = in[2].get<double>();
    }
    if (p.contains("control_period")) {
      sc.params.control_period = p["control_period"].get<double>();
    }
    if (p.contains("max_thrust")) {
      if (p["max_thrust"].is_null()) {
        sc.params.max_thrust.reset();
      } else {
        sc.params.max_thrust = p["max_thrust"].get<double>();
      }
    }
  }

  if (j.contains("weights")) {
    const json& w = j["weights"];
    require_keys(w, "weights", {"q_bar", "r"});
    if (w.contains("q_bar")) {
      sc.weights.q_bar = parse_covariance(w["q_bar"], 15, "weights.q_bar");
    }
    if (w.contains("r")) {
      sc.weights.r = parse_covariance(w["r"], 4, "weights.r");
    }
  }

  if (j.contains("trajectory")) {
    const json& t = j["trajectory"];
    require_keys(t, "trajectory", {"waypoints", "altitude", "speed"});
    std::vector<Eigen::Vector2d> wps;
    for (const auto& w : sc.trajectory.waypoints()) wps.push_back(w);
    double altitude = sc.trajectory.altitude();
    double speed = sc.trajectory.speed();
    if (t.contains("waypoints")) {
      wps.clear();
      for (const auto& w : t["waypoints"]) {
        if (!w.is_array() || w.size() != 2) {
          throw std::invalid_argument(
              "trajectory.waypoints must be [x, y] pairs");
        }
        wps.emplace_back(w[0].get<double>(), w[1].get<double>());
      }
    }
    if (t.contains("altitude")) altitude = t["altitude"].get<double>();
    if (t.contains("speed")) speed = t["speed"].get<double>();
    sc.trajectory = harness::Trajectory(std::move(wps), altitude, speed);
  }

  if (j.contains("duration")) sc.duration = j["duration"].get<double>();
  if (j.contains("seed")) sc.seed = j["seed"].get<std::uint64_t>();

  if (j.contains("sensor_set")) {
    const std::string s = j["sensor_set"].get<std::string>();
    if (s == "imu_uwb") {
      sc.sensor_set = harness::SensorSet::imu_uwb;
    } else if (s == "imu_uwb_yolo") {
      sc.sensor_set = harness::SensorSet::imu_uwb_yolo;
    } else {
      throw std::invalid_argument("sensor_set must be imu_uwb or imu_uwb_yolo");
    }
  }
  if (j.contains("plant")) {
    const std::string s = j["plant"].get<std::string>();
    if (s == "nonlinear") {
      sc.plant = harness::PlantModel::nonlinear;
    } else if (s == "linear") {
      sc.plant = harness::PlantModel::linear;
    } else {
      throw std::invalid_argument("plant must be nonlinear or linear");
    }
  }
  if (j.contains("sensor_mode")) {
    const std::string s = j["sensor_mode"].get<std::string>();
    if (s == "geometric") {
      sc.sensor_mode = harness::SensorMode::geometric;
    } else if (s == "direct") {
      sc.sensor_mode = harness::SensorMode::direct;
    } else {
      throw std::invalid_argument("sensor_mode must be geometric or direct");
    }
  }

  if (j.contains("anchors")) {
    sc.anchors = sensors::AnchorSet(parse_points(j["anchors"], "anchors"));
  }

  if (j.contains("landmarks")) {
    const json& l = j["landmarks"];
    require_keys(l, "landmarks", {"points", "max_range", "fov_half_angle"});
    if (l.contains("points")) {
      sc.landmarks.landmarks = parse_points(l["points"], "landmarks.points");
    }
    if (l.contains("max_range")) {
      sc.landmarks.max_range = l["max_range"].get<double>();
    }
    if (l.contains("fov_half_angle")) {
      sc.landmarks.fov_half_angle = l["fov_half_angle"].get<double>();
    }
  }

  if (j.contains("dropout")) {
    const json& d = j["dropout"];
    require_keys(d, "dropout", {"p_uwb", "p_yolo", "p_imu", "uwb_blackout"});
    if (d.contains("p_uwb")) sc.dropout.p_uwb = d["p_uwb"].get<double>();
    if (d.contains("p_yolo")) sc.dropout.p_yolo = d["p_yolo"].get<double>();
    if (d.contains("p_imu")) sc.dropout.p_imu = d["p_imu"].get<double>();
    if (d.contains("uwb_blackout")) {
      if (d["uwb_blackout"].is_null()) {
        sc.dropout.uwb_blackout.reset();
      } else {
        const json& b = d["uwb_blackout"];
        if (!b.is_array() || b.size() != 2) {
          throw std::invalid_argument("dropout.uwb_blackout must be [lo, hi]");
        }
        sc.dropout.uwb_blackout =
            std::make_pair(b[0].get<double>(), b[1].get<double>());
      }
    }
  }

  if (j.contains("noise")) {
    const json& n = j["noise"];
    require_keys(n, "noise",
                 {"process", "uwb_range_std", "yolo_range_std", "imu_noise_var",
                  "direct_uwb_var", "direct_yolo_var"});
    if (n.contains("process")) {
      sc.noise.process = parse_covariance(n["process"], 12, "noise.process");
    }
    if (n.contains("uwb_range_std")) {
      sc.noise.uwb_range_std = n["uwb_range_std"].get<double>();
    }
    if (n.contains("yolo_range_std")) {
      sc.noise.yolo_range_std = n["yolo_range_std"].get<double>();
    }
    if (n.contains("imu_noise_var")) {
      sc.noise.imu_noise_var = n["imu_noise_var"].get<double>();
    }
    if (n.contains("direct_uwb_var")) {
      sc.noise.direct_uwb_var = n["direct_uwb_var"].get<double>();
    }
    if (n.contains("direct_yolo_var")) {
      sc.noise.direct_yolo_var = n["direct_yolo_var"].get<double>();
    }
  }

  if (j.contains("filter")) {
    const json& f = j["filter"];
    require_keys(f, "filter", {"process", "measurement"});
    if (f.contains("process")) {
      sc.filter_process = parse_covariance(f["process"], 12, "filter.process");
    }
    if (f.contains("measurement")) {
      sc.filter_measurement =
          parse_covariance(f["measurement"], 9, "filter.measurement");
    }
  }

  if (j.contains("initial")) {
    const json& ini = j["initial"];
    require_keys(ini, "initial", {"mean", "covariance"});
    if (ini.contains("mean")) {
      const json& m = ini["mean"];
      if (!m.is_array() || m.size() != 12) {
        throw std::invalid_argument("initial.mean must have 12 entries");
      }
      for (int i = 0; i < 12; ++i) {
        sc.initial_mean(i) = m[static_cast<std::size_t>(i)].get<double>();
      }
    }
    if (ini.contains("covariance")) {
      sc.initial_covariance =
          parse_covariance(ini["covariance"], 12, "initial.covariance");
    }
  }

  if (j.contains("integrator_clamp")) {
    if (j["integrator_clamp"].is_null()) {
      sc.integrator_clamp.reset();
    } else {
      sc.integrator_clamp = j["integrator_clamp"].get<double>();
    }
  }
  if (j.contains("divergence_bound")) {
    sc.divergence_bound = j["divergence_bound"].get<double>();
  }
}

}  // namespace

harness::Scenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario JSON parse error: ") +
                                e.what());
  }
  if (!j.is_object()) {
    throw std::invalid_argument("scenario JSON must be an object");
  }
  harness::Scenario sc = harness::Scenario::demo();
  try {
    overlay(sc, j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario JSON type error: ") +
                                e.what());
  }
  sc.validate();
  return sc;
}

harness::Scenario load_scenario(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw harness::IoError("cannot open scenario file", path);
  }
  std::ostringstream buf;
  buf << f.rdbuf();
  return scenario_from_json(buf.str());
}

std::string scenario_to_json(const harness::Scenario& sc) {
  json j;
  j["params"] = {
      {"mass", sc.params.mass},
      {"gravity", sc.params.gravity},
      {"inertia",
       {sc.params.inertia_x, sc.params.inertia_y, sc.params.inertia_z}},
      {"control_period", sc.params.control_period},
      {"max_thrust",
       sc.params.max_thrust ? json(*sc.params.max_thrust) : json(nullptr)},
  };
  j["weights"] = {{"q_bar", covariance_to_json(sc.weights.q_bar.matrix())},
                  {"r", covariance_to_json(sc.weights.r.matrix())}};
  json wps = json::array();
  for (const auto& w : sc.trajectory.waypoints()) {
    wps.push_back({w.x(), w.y()});
  }
  j["trajectory"] = {{"waypoints", wps},
                     {"altitude", sc.trajectory.altitude()},
                     {"speed", sc.trajectory.speed()}};
  j["duration"] = sc.duration;
  j["seed"] = sc.seed;
  j["sensor_set"] =
      sc.sensor_set == harness::SensorSet::imu_uwb ? "imu_uwb" : "imu_uwb_yolo";
  j["plant"] =
      sc.plant == harness::PlantModel::nonlinear ? "nonlinear" : "linear";
  j["sensor_mode"] = sc.sensor_mode == harness::SensorMode::geometric
                         ? "geometric"
                         : "direct";
  json anchors = json::array();
  for (const auto& a : sc.anchors.anchors()) {
    anchors.push_back({a.x(), a.y(), a.z()});
  }
  j["anchors"] = anchors;
  json lms = json::array();
  for (const auto& l : sc.landmarks.landmarks) {
    lms.push_back({l.x(), l.y(), l.z()});
  }
  j["landmarks"] = {{"points", lms},
                    {"max_range", sc.landmarks.max_range},
                    {"fov_half_angle", sc.landmarks.fov_half_angle}};
  j["dropout"] = {{"p_uwb", sc.dropout.p_uwb},
                  {"p_yolo", sc.dropout.p_yolo},
                  {"p_imu", sc.dropout.p_imu},
                  {"uwb_blackout",
                   sc.dropout.uwb_blackout
                       ? json({sc.dropout.uwb_blackout->first,
                               sc.dropout.uwb_blackout->second})
                       : json(nullptr)}};
  j["noise"] = {{"process", covariance_to_json(sc.noise.process.matrix())},
                {"uwb_range_std", sc.noise.uwb_range_std},
                {"yolo_range_std", sc.noise.yolo_range_std},
                {"imu_noise_var", sc.noise.imu_noise_var},
                {"direct_uwb_var", sc.noise.direct_uwb_var},
                {"direct_yolo_var", sc.noise.direct_yolo_var}};
  j["filter"] = {{"process", covariance_to_json(sc.filter_process.matrix())},
                 {"measurement",
                  covariance_to_json(sc.filter_measurement.matrix())}};
  json mean = json::array();
  for (int i = 0; i < 12; ++i) mean.push_back(sc.initial_mean(i));
  j["initial"] = {{"mean", mean},
                  {"covariance",
                   covariance_to_json(sc.initial_covariance.matrix())}};
  j["integrator_clamp"] =
      sc.integrator_clamp ? json(*sc.integrator_clamp) : json(nullptr);
  j["divergence_bound"] = sc.divergence_bound;
  return j.dump(2) + "\n";
}

}  // namespace quadfusion::config
