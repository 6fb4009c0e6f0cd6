#pragma once

#include <Eigen/Dense>

#include "quadfusion/model.hpp"
#include "quadfusion/numerics.hpp"
#include "quadfusion/sensors.hpp"

namespace quadfusion::estimator {

// 3x9 selector feeding the tracking integrator: use the UWB position fix
// when present, otherwise the landmark fix, otherwise nothing.
Eigen::Matrix<double, 3, 9> selection_matrix(const sensors::AvailabilityMask& mask);
// Selector assumed by the offline gain design (UWB available).
Eigen::Matrix<double, 3, 9> nominal_selection();

// Discrete model augmented with the 3 integrator states. The integrator
// absorbs measurement noise through the selector, so the process and
// measurement noises of the augmented system are correlated; v1/v12/v2 are
// the joint covariance blocks of the stacked noise (w_k, v_k) against v_k.
struct AugmentedModel {
  model::DiscreteModel discrete;
  Eigen::Matrix<double, 9, 15> c_bar = Eigen::Matrix<double, 9, 15>::Zero();
  Eigen::Matrix<double, 15, 4> gamma_bar = Eigen::Matrix<double, 15, 4>::Zero();
  Eigen::Matrix<double, 15, 3> i_bar = Eigen::Matrix<double, 15, 3>::Zero();
  Matrix v1;   // 21 x 21
  Matrix v12;  // 21 x 9
  Matrix v2;   // 9 x 9

  // State transition [[Phi, 0], [-E C, I]] for the step's selector.
  Eigen::Matrix<double, 15, 15> phi_bar(const Eigen::Matrix<double, 3, 9>& e) const;
  // Noise input [[I, 0], [0, -E]] mapping (w_k, v_k) into the state.
  Eigen::Matrix<double, 15, 21> e_bar(const Eigen::Matrix<double, 3, 9>& e) const;
};

AugmentedModel build_augmented(const model::DiscreteModel& dm);

// One-step-ahead predictor state: x_hat is E[x_k | y_0..y_{k-1}].
struct AugmentedEstimate {
  Eigen::Matrix<double, 15, 1> x_hat = Eigen::Matrix<double, 15, 1>::Zero();
  Matrix p = Matrix::Zero(15, 15);

  Eigen::Matrix<double, 12, 1> physical() const { return x_hat.head<12>(); }
  Matrix physical_covariance() const { return p.topLeftCorner(12, 12); }
};

// Physical-state prior plus an exactly-known (zero) integrator block.
AugmentedEstimate initial_estimate(const model::StateVector& mean,
                                   const Spd& covariance);

struct KfStepInfo {
  Eigen::Matrix<double, 9, 1> innovation = Eigen::Matrix<double, 9, 1>::Zero();
  Matrix innovation_covariance;  // 9 x 9
  Matrix gain;                   // 15 x 9
};

// Kalman predictor step for the augmented model with intermittent
// measurements and the process/measurement noise correlation above.
// u is the applied deviation control, r the position reference entering the
// integrator. Absent measurement blocks are masked to zero, which together
// with the zero rows of H makes them drop out exactly.
void kf_step(AugmentedEstimate& est, const AugmentedModel& am,
             const sensors::MeasurementFrame& frame,
             const model::ControlVector& u, const Eigen::Vector3d& r,
             KfStepInfo* info = nullptr);

}  // namespace quadfusion::estimator
