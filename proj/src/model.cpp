#include "quadfusion/model.hpp"

#include <cmath>

namespace quadfusion::model {

void QuadrotorParams::validate() const {
  auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!pos(mass) || !pos(gravity) || !pos(inertia_x) || !pos(inertia_y) ||
      !pos(inertia_z) || !pos(control_period) || !pos(thrust_limit()))
    throw std::invalid_argument("QuadrotorParams: all parameters must be positive");
}

StateVector PlantState::as_vector() const {
  StateVector v;
  v << position, attitude, velocity, attitude_rate;
  return v;
}

PlantState PlantState::from_vector(const StateVector& v) {
  PlantState s;
  s.position = v.segment<3>(0);
  s.attitude = v.segment<3>(3);
  s.velocity = v.segment<3>(6);
  s.attitude_rate = v.segment<3>(9);
  return s;
}

void PlantState::wrap_attitude() {
  for (int i = 0; i < 3; ++i) {
    double a = std::remainder(attitude[i], 2.0 * M_PI);  // (-pi, pi]
    if (a <= -M_PI) a = M_PI;
    attitude[i] = a;
  }
}

bool PlantState::finite() const { return as_vector().allFinite(); }

ControlInput hover_input(const QuadrotorParams& p) {
  return {p.hover_thrust(), Eigen::Vector3d::Zero()};
}

ControlInput from_deviation(const ControlVector& u, const QuadrotorParams& p) {
  ControlInput in;
  in.thrust = std::clamp(u[0] + p.hover_thrust(), 0.0, p.thrust_limit());
  in.torque = u.tail<3>();
  return in;
}

ControlVector to_deviation(const ControlInput& u, const QuadrotorParams& p) {
  ControlVector v;
  v << u.thrust - p.hover_thrust(), u.torque;
  return v;
}

StateVector nonlinear_derivative(const PlantState& s, const ControlInput& u,
                                 const QuadrotorParams& p) {
  const double cph = std::cos(s.attitude[0]), sph = std::sin(s.attitude[0]);
  const double cth = std::cos(s.attitude[1]), sth = std::sin(s.attitude[1]);
  const double cps = std::cos(s.attitude[2]), sps = std::sin(s.attitude[2]);
  const double ft_m = u.thrust / p.mass;
  const auto& w = s.attitude_rate;

  StateVector d;
  d.segment<3>(0) = s.velocity;
  d.segment<3>(3) = s.attitude_rate;
  d[6] = ft_m * (cph * sth * cps + sps * sph);
  d[7] = ft_m * (cph * sth * sps - cps * sph);
  d[8] = ft_m * (cph * cth) - p.gravity;
  d[9] = (p.inertia_y - p.inertia_z) / p.inertia_x * w[1] * w[2] +
         u.torque[0] / p.inertia_x;
  d[10] = (p.inertia_z - p.inertia_x) / p.inertia_y * w[0] * w[2] +
          u.torque[1] / p.inertia_y;
  d[11] = (p.inertia_x - p.inertia_y) / p.inertia_z * w[0] * w[1] +
          u.torque[2] / p.inertia_z;
  return d;
}

ContinuousLinearModel continuous_linear_matrices(const QuadrotorParams& p) {
  p.validate();
  Matrix a = Matrix::Zero(12, 12);
  for (int i = 0; i < 6; ++i) a(i, i + 6) = 1.0;  // position/attitude kinematics
  a(idx::vx, idx::pitch) = p.gravity;   // x accel from pitch tilt
  a(idx::vy, idx::roll) = -p.gravity;   // y accel from roll tilt
  Matrix b = Matrix::Zero(12, 4);
  b(idx::vz, 0) = 1.0 / p.mass;
  b(idx::roll_rate, 1) = 1.0 / p.inertia_x;
  b(idx::pitch_rate, 2) = 1.0 / p.inertia_y;
  b(idx::yaw_rate, 3) = 1.0 / p.inertia_z;
  return {a, b};
}

Matrix measurement_matrix() {
  Matrix c = Matrix::Zero(9, 12);
  c.block<3, 3>(0, 0).setIdentity();  // UWB position
  c.block<3, 3>(3, 0).setIdentity();  // landmark position
  c.block<3, 3>(6, 3).setIdentity();  // IMU attitude
  return c;
}

DiscreteModel build_discrete_model(const QuadrotorParams& p, const Spd& w,
                                   const Spd& v) {
  p.validate();
  if (w.size() != 12) throw std::invalid_argument("build_discrete_model: w must be 12x12");
  if (v.size() != 9) throw std::invalid_argument("build_discrete_model: v must be 9x9");
  const auto [a, b] = continuous_linear_matrices(p);
  auto zoh = discretize_zoh(a, b, p.control_period);
  return {std::move(zoh.phi), std::move(zoh.gamma), measurement_matrix(), w, v,
          p.control_period};
}

}  // namespace quadfusion::model
