#include <random>

#include "doctest.h"
#include "quadfusion/estimator.hpp"

using namespace quadfusion;
using namespace quadfusion::estimator;

namespace {

model::DiscreteModel design_model() {
  Vector v(9);
  v << 0.05, 0.05, 0.05, 0.08, 0.08, 0.08, 0.01, 0.01, 0.01;
  return model::build_discrete_model(model::QuadrotorParams{},
                                     Spd::scaled_identity(12, 1.0),
                                     Spd::diagonal(v));
}

sensors::AvailabilityMask mask_of(bool uwb, bool yolo, bool imu) {
  sensors::AvailabilityMask m;
  m.uwb = uwb;
  m.yolo = yolo;
  m.imu = imu;
  return m;
}

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("the integrator selector prefers the uwb fix") {
  Eigen::Matrix<double, 3, 9> uwb = Eigen::Matrix<double, 3, 9>::Zero();
  uwb.block<3, 3>(0, 0).setIdentity();
  Eigen::Matrix<double, 3, 9> yolo = Eigen::Matrix<double, 3, 9>::Zero();
  yolo.block<3, 3>(0, 3).setIdentity();

  CHECK((selection_matrix(mask_of(true, true, true)) - uwb).norm() == 0.0);
  CHECK((selection_matrix(mask_of(true, false, false)) - uwb).norm() == 0.0);
  CHECK((selection_matrix(mask_of(false, true, true)) - yolo).norm() == 0.0);
  CHECK(selection_matrix(mask_of(false, false, true)).norm() == 0.0);
  CHECK((nominal_selection() - uwb).norm() == 0.0);
}

TEST_CASE("the augmented model has the documented block structure") {
  const auto dm = design_model();
  const AugmentedModel am = build_augmented(dm);

  CHECK((am.c_bar.leftCols<12>() - dm.c).norm() == 0.0);
  CHECK(am.c_bar.rightCols<3>().norm() == 0.0);
  CHECK((am.gamma_bar.topRows<12>() - dm.gamma).norm() == 0.0);
  CHECK(am.gamma_bar.bottomRows<3>().norm() == 0.0);
  CHECK(am.i_bar.topRows<12>().norm() == 0.0);
  CHECK((am.i_bar.bottomRows<3>() - Eigen::Matrix3d::Identity()).norm() == 0.0);

  CHECK((am.v1.topLeftCorner(12, 12) - dm.w.matrix()).norm() == 0.0);
  CHECK((am.v1.bottomRightCorner(9, 9) - dm.v.matrix()).norm() == 0.0);
  CHECK(am.v1.topRightCorner(12, 9).norm() == 0.0);
  CHECK(am.v12.topRows(12).norm() == 0.0);
  CHECK((am.v12.bottomRows(9) - dm.v.matrix()).norm() == 0.0);
  CHECK((am.v2 - dm.v.matrix()).norm() == 0.0);

  const auto e = nominal_selection();
  const auto phi = am.phi_bar(e);
  CHECK((phi.topLeftCorner<12, 12>() - dm.phi).norm() == 0.0);
  CHECK(phi.topRightCorner<12, 3>().norm() == 0.0);
  CHECK((phi.bottomLeftCorner<3, 12>() + e * dm.c).norm() == 0.0);
  CHECK((phi.bottomRightCorner<3, 3>() - Eigen::Matrix3d::Identity()).norm() ==
        0.0);

  const auto eb = am.e_bar(e);
  CHECK((eb.topLeftCorner<12, 12>() - Matrix::Identity(12, 12)).norm() == 0.0);
  CHECK(eb.topRightCorner<12, 9>().norm() == 0.0);
  CHECK(eb.bottomLeftCorner<3, 12>().norm() == 0.0);
  CHECK((eb.bottomRightCorner<3, 9>() + e).norm() == 0.0);
}

TEST_CASE("initial estimates pin the integrator block to zero") {
  model::StateVector mean;
  for (int i = 0; i < 12; ++i) mean(i) = 0.5 * i;
  const Spd p0 = Spd::scaled_identity(12, 0.3);
  const AugmentedEstimate est = initial_estimate(mean, p0);
  CHECK((est.physical() - mean).norm() == 0.0);
  CHECK(est.x_hat.tail<3>().norm() == 0.0);
  CHECK((est.physical_covariance() - p0.matrix()).norm() == 0.0);
  CHECK(est.p.bottomRightCorner(3, 3).norm() == 0.0);
  CHECK(est.p.topRightCorner(12, 3).norm() == 0.0);

  CHECK_THROWS_AS(initial_estimate(mean, Spd::scaled_identity(11, 0.3)),
                  std::invalid_argument);
}

TEST_CASE("absent measurement blocks are ignored bit-for-bit") {
  const AugmentedModel am = build_augmented(design_model());
  AugmentedEstimate a = initial_estimate(model::StateVector::Zero(),
                                         Spd::scaled_identity(12, 0.5));
  AugmentedEstimate b = a;

  sensors::MeasurementFrame clean;
  clean.mask = mask_of(true, false, false);
  clean.y.segment<3>(0) << 1.0, 2.0, 1.5;

  sensors::MeasurementFrame garbage = clean;
  garbage.y.segment<3>(3) << 1e9, -3e7, 42.0;
  garbage.y.segment<3>(6) << -5e5, 7.7, 1e12;

  const model::ControlVector u(0.1, -0.01, 0.02, 0.0);
  const Eigen::Vector3d r(1.0, 2.0, 1.5);
  kf_step(a, am, clean, u, r);
  kf_step(b, am, garbage, u, r);
  CHECK((a.x_hat - b.x_hat).norm() == 0.0);
  CHECK((a.p - b.p).norm() == 0.0);
}

TEST_CASE("a fully masked step is pure prediction") {
  const AugmentedModel am = build_augmented(design_model());
  AugmentedEstimate est = initial_estimate(
      (model::StateVector() << 1, 2, 1.5, 0.1, -0.1, 0.2, 0.5, 0, 0, 0, 0, 0)
          .finished(),
      Spd::scaled_identity(12, 0.4));
  const AugmentedEstimate before = est;

  sensors::MeasurementFrame frame;  // nothing available
  const model::ControlVector u(0.2, 0.0, -0.01, 0.003);
  const Eigen::Vector3d r(1.0, 2.0, 1.5);
  KfStepInfo info;
  kf_step(est, am, frame, u, r, &info);

  CHECK(info.gain.norm() == doctest::Approx(0.0));
  const Eigen::Matrix<double, 3, 9> e0 = Eigen::Matrix<double, 3, 9>::Zero();
  const auto phi = am.phi_bar(e0);
  const Eigen::Matrix<double, 15, 1> x_pred =
      phi * before.x_hat + am.gamma_bar * u + am.i_bar * r;
  CHECK((est.x_hat - x_pred).norm() < 1e-12);

  Matrix q_pred = Matrix::Zero(15, 15);
  q_pred.topLeftCorner(12, 12) = am.discrete.w.matrix();
  const Matrix p_pred = phi * before.p * phi.transpose() + q_pred;
  CHECK((est.p - p_pred).cwiseAbs().maxCoeff() < 1e-12);
  // Without a position fix the integrator keeps integrating the reference.
  CHECK((est.x_hat.tail<3>() - (before.x_hat.tail<3>() + r)).norm() < 1e-12);
}

TEST_CASE("the correlated-noise update matches a de-correlated reference") {
  // Reference implementation: shift the correlated part of the process noise
  // into the measurement channel (J = E V12 V2^-1), run a textbook predictor
  // on the transformed system, and compare state and covariance.
  const AugmentedModel am = build_augmented(design_model());
  const auto e = nominal_selection();
  const auto phi = am.phi_bar(e);
  const auto eb = am.e_bar(e);
  const Matrix h = am.c_bar;  // all sensors present
  const Matrix v2 = am.v2;
  const Matrix j = eb * am.v12 * v2.inverse();
  const Matrix phi_t = phi - j * h;                        // transformed transition
  const Matrix q_t = eb * am.v1 * eb.transpose() - j * v2 * j.transpose();

  AugmentedEstimate est = initial_estimate(model::StateVector::Zero(),
                                           Spd::scaled_identity(12, 0.25));
  Eigen::Matrix<double, 15, 1> x_ref = est.x_hat;
  Matrix p_ref = est.p;

  Rng rng = make_rng(31, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  sensors::MeasurementFrame frame;
  frame.mask = mask_of(true, true, true);

  for (int k = 0; k < 20; ++k) {
    for (int i = 0; i < 9; ++i) frame.y(i) = normal(rng);
    model::ControlVector u;
    for (int i = 0; i < 4; ++i) u(i) = 0.1 * normal(rng);
    const Eigen::Vector3d r(normal(rng), normal(rng), normal(rng));

    kf_step(est, am, frame, u, r);

    const Matrix s = h * p_ref * h.transpose() + v2;
    const Matrix k_gain = phi_t * p_ref * h.transpose() * s.inverse();
    const Eigen::Matrix<double, 15, 1> x_next =
        phi_t * x_ref + am.gamma_bar * u + am.i_bar * r + j * frame.y +
        k_gain * (frame.y - h * x_ref);
    const Matrix p_next = phi_t * p_ref * phi_t.transpose() + q_t -
                          k_gain * s * k_gain.transpose();
    x_ref = x_next;
    p_ref = symmetrize(p_next);

    CHECK((est.x_hat - x_ref).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((est.p - p_ref).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("the covariance stays symmetric psd under random masking") {
  const AugmentedModel am = build_augmented(design_model());
  AugmentedEstimate est = initial_estimate(model::StateVector::Zero(),
                                           Spd::scaled_identity(12, 1.0));
  Rng rng = make_rng(99, 0);
  std::uniform_int_distribution<int> bit(0, 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (int k = 0; k < 100; ++k) {
    sensors::MeasurementFrame frame;
    frame.mask = mask_of(bit(rng) != 0, bit(rng) != 0, bit(rng) != 0);
    for (int i = 0; i < 9; ++i) frame.y(i) = normal(rng);
    kf_step(est, am, frame, model::ControlVector::Zero(),
            Eigen::Vector3d(0.5, -0.5, 1.0));

    CHECK((est.p - est.p.transpose()).norm() == 0.0);
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Matrix>(est.p).eigenvalues().minCoeff();
    CHECK(min_eig > -1e-9);
  }
  CHECK(est.x_hat.allFinite());
}

TEST_CASE("position uncertainty grows while only the imu reports") {
  const AugmentedModel am = build_augmented(design_model());
  AugmentedEstimate est = initial_estimate(model::StateVector::Zero(),
                                           Spd::scaled_identity(12, 0.1));
  sensors::MeasurementFrame frame;
  frame.mask = mask_of(false, false, true);

  double prev = est.p(0, 0);
  for (int k = 0; k < 50; ++k) {
    kf_step(est, am, frame, model::ControlVector::Zero(),
            Eigen::Vector3d::Zero());
    CHECK(est.p(0, 0) > prev);
    prev = est.p(0, 0);
  }
}

TEST_CASE("kf_step reports its internals") {
  const AugmentedModel am = build_augmented(design_model());
  AugmentedEstimate est = initial_estimate(model::StateVector::Zero(),
                                           Spd::scaled_identity(12, 0.5));
  sensors::MeasurementFrame frame;
  frame.mask = mask_of(true, false, true);
  frame.y.segment<3>(0) << 0.2, -0.1, 1.4;
  frame.y.segment<3>(6) << 0.01, 0.02, -0.03;

  KfStepInfo info;
  kf_step(est, am, frame, model::ControlVector::Zero(),
          Eigen::Vector3d::Zero(), &info);
  CHECK(info.gain.rows() == 15);
  CHECK(info.gain.cols() == 9);
  CHECK(info.innovation_covariance.rows() == 9);
  CHECK((info.innovation_covariance - info.innovation_covariance.transpose())
            .norm() == 0.0);
  // The uwb innovation is the masked measurement itself (prior state is zero).
  CHECK((info.innovation.segment<3>(0) -
         Eigen::Vector3d(0.2, -0.1, 1.4)).norm() < 1e-12);
  CHECK(info.innovation.segment<3>(3).norm() == 0.0);
}

}  // TEST_SUITE
