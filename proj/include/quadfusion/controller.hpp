#pragma once

#include <Eigen/Dense>
#include <optional>

#include "quadfusion/estimator.hpp"
#include "quadfusion/model.hpp"
#include "quadfusion/numerics.hpp"

namespace quadfusion::controller {

// Infinite-horizon LQ weights on the augmented state (position, attitude,
// velocity, attitude rate, position integral) and the deviation input.
struct LqWeights {
  Spd q_bar = default_q_bar();
  Spd r = default_r();

  static Spd default_q_bar();
  static Spd default_r();
};

struct LqrResult {
  Matrix gain;         // m x n feedback gain L
  Matrix cost_to_go;   // n x n stationary Riccati solution
};

// L = (Gamma^T S Gamma + R)^-1 Gamma^T S Phi from the stationary Riccati
// solution; u = -L x is the optimal regulator.
LqrResult lqr_gain(const Matrix& phi, const Matrix& gamma, const Spd& q,
                   const Spd& r, const DareOptions& opts = {});

// Servo gain split into state and integrator parts, with the design-model
// closed-loop spectral radius and the Riccati fixed-point residual kept for
// verification.
struct ServoGain {
  Eigen::Matrix<double, 4, 12> l_state;
  Eigen::Matrix<double, 4, 3> l_integral;
  double closed_loop_radius = 0.0;
  double dare_residual = 0.0;
};

// Designs the gain on the nominal augmented model (UWB selector).
ServoGain compute_gain(const estimator::AugmentedModel& am, const LqWeights& w,
                       const DareOptions& opts = {});

// Accumulated position tracking error fed back through l_integral. The
// element-wise clamp stops windup when no position fix arrives for a while;
// nullopt disables it.
struct IntegratorState {
  Eigen::Vector3d value = Eigen::Vector3d::Zero();
  std::optional<double> clamp = 5.0;
};

// i <- i + r - (selected position fix). With no fix available the selector
// is zero and the step degenerates to i += r, which winds up quickly during
// an outage; the clamp bounds the damage until a fix returns.
void integral_update(IntegratorState& integrator,
                     const sensors::MeasurementFrame& frame,
                     const Eigen::Vector3d& r);

// u = -l_state (x_hat - x_ref) - l_integral i, in deviation units. x_ref is
// the reference position/velocity lifted into the state layout; at x_ref = 0
// this is the plain augmented-state feedback law.
model::ControlVector control_law(const ServoGain& gain,
                                 const model::StateVector& x_hat,
                                 const Eigen::Vector3d& integrator,
                                 const model::StateVector& x_ref =
                                     model::StateVector::Zero());

}  // namespace quadfusion::controller
