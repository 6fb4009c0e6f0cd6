#include "quadfusion/controller.hpp"

#include <algorithm>

namespace quadfusion::controller {

Spd LqWeights::default_q_bar() {
  Vector d(15);
  // Position error is cheap relative to attitude: aggressive position gains
  // push the linearized design outside its small-angle validity and the
  // nonlinear plant tumbles on reacquisition transients.
  d << 0.05, 0.05, 0.05,        // position
      2.0, 2.0, 2.0,            // attitude
      0.2, 0.2, 0.2,            // velocity
      0.05, 0.05, 0.05,         // attitude rate
      3e-4, 3e-4, 3e-4;         // position integral
  return Spd::diagonal(d);
}

Spd LqWeights::default_r() {
  Vector d(4);
  d << 0.1, 1.0, 1.0, 1.0;  // thrust deviation, torques
  return Spd::diagonal(d);
}

LqrResult lqr_gain(const Matrix& phi, const Matrix& gamma, const Spd& q,
                   const Spd& r, const DareOptions& opts) {
  const Matrix s = solve_dare(phi, gamma, q, r, opts);
  const Matrix gsg = r.matrix() + gamma.transpose() * s * gamma;
  Eigen::LDLT<Matrix> ldlt(gsg);
  if (ldlt.info() != Eigen::Success) {
    throw NumericalError("LQR input-weight factorization failed");
  }
  LqrResult out;
  out.gain = ldlt.solve(gamma.transpose() * s * phi);
  out.cost_to_go = s;
  return out;
}

ServoGain compute_gain(const estimator::AugmentedModel& am, const LqWeights& w,
                       const DareOptions& opts) {
  if (w.q_bar.size() != 15 || w.r.size() != 4) {
    throw std::invalid_argument("servo weights must be 15x15 and 4x4");
  }
  const Matrix phi = am.phi_bar(estimator::nominal_selection());
  const Matrix gamma = am.gamma_bar;
  const LqrResult res = lqr_gain(phi, gamma, w.q_bar, w.r, opts);

  ServoGain g;
  g.l_state = res.gain.leftCols<12>();
  g.l_integral = res.gain.rightCols<3>();
  g.closed_loop_radius = spectral_radius(phi - gamma * res.gain);
  g.dare_residual =
      dare_residual(res.cost_to_go, phi, gamma, w.q_bar.matrix(), w.r.matrix());
  return g;
}

void integral_update(IntegratorState& integrator,
                     const sensors::MeasurementFrame& frame,
                     const Eigen::Vector3d& r) {
  const Eigen::Matrix<double, 3, 9> e = estimator::selection_matrix(frame.mask);
  integrator.value += r - e * frame.y;
  if (integrator.clamp) {
    const double c = *integrator.clamp;
    integrator.value = integrator.value.cwiseMax(-c).cwiseMin(c);
  }
}

model::ControlVector control_law(const ServoGain& gain,
                                 const model::StateVector& x_hat,
                                 const Eigen::Vector3d& integrator,
                                 const model::StateVector& x_ref) {
  return -gain.l_state * (x_hat - x_ref) - gain.l_integral * integrator;
}

}  // namespace quadfusion::controller
