#include "quadfusion/estimator.hpp"

namespace quadfusion::estimator {

Eigen::Matrix<double, 3, 9> selection_matrix(const sensors::AvailabilityMask& mask) {
  Eigen::Matrix<double, 3, 9> e = Eigen::Matrix<double, 3, 9>::Zero();
  if (mask.uwb) {
    e.block<3, 3>(0, 0).setIdentity();
  } else if (mask.yolo) {
    e.block<3, 3>(0, 3).setIdentity();
  }
  return e;
}

Eigen::Matrix<double, 3, 9> nominal_selection() {
  sensors::AvailabilityMask mask;
  mask.uwb = true;
  return selection_matrix(mask);
}

Eigen::Matrix<double, 15, 15> AugmentedModel::phi_bar(
    const Eigen::Matrix<double, 3, 9>& e) const {
  Eigen::Matrix<double, 15, 15> out = Eigen::Matrix<double, 15, 15>::Zero();
  out.topLeftCorner<12, 12>() = discrete.phi;
  out.bottomLeftCorner<3, 12>() = -e * discrete.c;
  out.bottomRightCorner<3, 3>().setIdentity();
  return out;
}

Eigen::Matrix<double, 15, 21> AugmentedModel::e_bar(
    const Eigen::Matrix<double, 3, 9>& e) const {
  Eigen::Matrix<double, 15, 21> out = Eigen::Matrix<double, 15, 21>::Zero();
  out.topLeftCorner<12, 12>().setIdentity();
  out.bottomRightCorner<3, 9>() = -e;
  return out;
}

AugmentedModel build_augmented(const model::DiscreteModel& dm) {
  AugmentedModel am;
  am.discrete = dm;
  am.c_bar.leftCols<12>() = dm.c;
  am.gamma_bar.topRows<12>() = dm.gamma;
  am.i_bar.bottomRows<3>().setIdentity();

  am.v1 = Matrix::Zero(21, 21);
  am.v1.topLeftCorner<12, 12>() = dm.w.matrix();
  am.v1.bottomRightCorner<9, 9>() = dm.v.matrix();
  am.v12 = Matrix::Zero(21, 9);
  am.v12.bottomRows<9>() = dm.v.matrix();
  am.v2 = dm.v.matrix();
  return am;
}

AugmentedEstimate initial_estimate(const model::StateVector& mean,
                                   const Spd& covariance) {
  if (covariance.size() != 12) {
    throw std::invalid_argument("initial covariance must be 12 x 12");
  }
  AugmentedEstimate est;
  est.x_hat.head<12>() = mean;
  est.p.topLeftCorner<12, 12>() = covariance.matrix();
  return est;
}

void kf_step(AugmentedEstimate& est, const AugmentedModel& am,
             const sensors::MeasurementFrame& frame,
             const model::ControlVector& u, const Eigen::Vector3d& r,
             KfStepInfo* info) {
  const Eigen::Matrix<double, 3, 9> e = selection_matrix(frame.mask);
  const Eigen::Matrix<double, 9, 9> delta = sensors::delta_matrix(frame.mask);
  const Eigen::Matrix<double, 9, 15> h = delta * am.c_bar;
  const Eigen::Matrix<double, 15, 15> phi = am.phi_bar(e);
  const Eigen::Matrix<double, 15, 21> eb = am.e_bar(e);

  // Correlated-noise predictor: the gain works on M = Phi P H^T + E V12.
  const Matrix m = phi * est.p * h.transpose() + eb * am.v12;
  const Matrix s = symmetrize(h * est.p * h.transpose() + am.v2);
  Eigen::LDLT<Matrix> ldlt(s);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("innovation covariance factorization failed");
  }
  const Matrix gain = ldlt.solve(m.transpose()).transpose();

  // Zero out absent blocks of y; their H rows are zero as well, so they
  // contribute exactly nothing to the innovation.
  const Eigen::Matrix<double, 9, 1> y_masked = delta * frame.y;
  const Eigen::Matrix<double, 9, 1> innovation = y_masked - h * est.x_hat;

  est.x_hat = phi * est.x_hat + am.gamma_bar * u + am.i_bar * r + gain * innovation;
  est.p = symmetrize(phi * est.p * phi.transpose() + eb * am.v1 * eb.transpose() -
                     gain * m.transpose());

  if (info != nullptr) {
    info->innovation = innovation;
    info->innovation_covariance = s;
    info->gain = gain;
  }
}

}  // namespace quadfusion::estimator
