#pragma once

#include <Eigen/Dense>
#include <optional>

#include "quadfusion/numerics.hpp"

namespace quadfusion::model {

using StateVector = Eigen::Matrix<double, 12, 1>;
using ControlVector = Eigen::Vector4d;  // deviation form: (f_t - m g, tau_x, tau_y, tau_z)

// state layout indices: xi, eta, xi_dot, eta_dot
namespace idx {
inline constexpr int x = 0, y = 1, z = 2;
inline constexpr int roll = 3, pitch = 4, yaw = 5;
inline constexpr int vx = 6, vy = 7, vz = 8;
inline constexpr int roll_rate = 9, pitch_rate = 10, yaw_rate = 11;
}  // namespace idx

struct QuadrotorParams {
  double mass = 2.5;          // kg
  double gravity = 9.81;      // m/s^2
  double inertia_x = 0.045;   // kg m^2
  double inertia_y = 0.045;
  double inertia_z = 0.09;
  double control_period = 0.01;  // s
  std::optional<double> max_thrust;  // N; defaults to 2 m g

  double thrust_limit() const { return max_thrust.value_or(2.0 * mass * gravity); }
  double hover_thrust() const { return mass * gravity; }
  void validate() const;
};

struct PlantState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();       // xi (inertial)
  Eigen::Vector3d attitude = Eigen::Vector3d::Zero();       // eta (roll, pitch, yaw)
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();       // xi_dot
  Eigen::Vector3d attitude_rate = Eigen::Vector3d::Zero();  // eta_dot

  StateVector as_vector() const;
  static PlantState from_vector(const StateVector& v);
  void wrap_attitude();  // angles into (-pi, pi]
  bool finite() const;
};

// Total thrust along body z plus body torques (plant units, not deviations).
struct ControlInput {
  double thrust = 0.0;  // N, in [0, thrust_limit]
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();  // N m
};

ControlInput hover_input(const QuadrotorParams& p);
// Deviation -> plant input: add hover thrust and clamp to [0, thrust_limit].
ControlInput from_deviation(const ControlVector& u, const QuadrotorParams& p);
// Plant input -> deviation actually applied (post-clamp); this is what the
// linear design model and the filter must see.
ControlVector to_deviation(const ControlInput& u, const QuadrotorParams& p);

// Newton-Euler rigid-body dynamics with Euler-angle kinematics.
StateVector nonlinear_derivative(const PlantState& s, const ControlInput& u,
                                 const QuadrotorParams& p);

struct ContinuousLinearModel {
  Matrix a;  // 12 x 12
  Matrix b;  // 12 x 4
};
// Jacobians of the dynamics at hover (zero attitude, hover thrust).
ContinuousLinearModel continuous_linear_matrices(const QuadrotorParams& p);

// Fixed output map: rows 1-3 UWB position, 4-6 landmark-derived position,
// 7-9 IMU attitude.
Matrix measurement_matrix();  // 9 x 12

struct DiscreteModel {
  Matrix phi;    // 12 x 12
  Matrix gamma;  // 12 x 4
  Matrix c;      // 9 x 12
  Spd w;         // 12, design process covariance
  Spd v;         // 9, design measurement covariance
  double h = 0.0;
};

// ZOH discretization at the control period plus the covariances the filter
// will assume.
DiscreteModel build_discrete_model(const QuadrotorParams& p, const Spd& w,
                                   const Spd& v);

}  // namespace quadfusion::model
