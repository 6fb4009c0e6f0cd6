#include <cmath>

#include "doctest.h"
#include "quadfusion/model.hpp"

using namespace quadfusion;
using namespace quadfusion::model;

namespace {

PlantState hover_state() {
  PlantState s;
  s.position = Eigen::Vector3d(1.0, -2.0, 1.5);
  s.attitude.setZero();
  s.velocity.setZero();
  s.attitude_rate.setZero();
  return s;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("parameter validation") {
  QuadrotorParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.hover_thrust() == doctest::Approx(2.5 * 9.81));
  CHECK(p.thrust_limit() == doctest::Approx(2.0 * 2.5 * 9.81));

  p.max_thrust = 30.0;
  CHECK(p.thrust_limit() == doctest::Approx(30.0));

  QuadrotorParams bad = QuadrotorParams{};
  bad.mass = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = QuadrotorParams{};
  bad.control_period = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = QuadrotorParams{};
  bad.max_thrust = -5.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("plant state vector round trip and attitude wrapping") {
  StateVector v;
  for (int i = 0; i < 12; ++i) v(i) = 0.1 * i - 0.5;
  PlantState s = PlantState::from_vector(v);
  CHECK((s.as_vector() - v).norm() == 0.0);

  s.attitude << 3.0 * M_PI, -3.0 * M_PI, 0.1;
  s.wrap_attitude();
  CHECK(s.attitude(0) == doctest::Approx(M_PI));
  CHECK(s.attitude(1) == doctest::Approx(M_PI));
  CHECK(s.attitude(2) == doctest::Approx(0.1));
  s.attitude << 2.0 * M_PI, 0.0, 0.0;
  s.wrap_attitude();
  CHECK(s.attitude(0) == doctest::Approx(0.0));

  CHECK(s.finite());
  s.velocity(1) = std::nan("");
  CHECK_FALSE(s.finite());
}

TEST_CASE("deviation inputs clamp against the thrust envelope") {
  QuadrotorParams p;
  const double hover = p.hover_thrust();

  ControlVector u = ControlVector::Zero();
  u(0) = -2.0 * hover;  // would demand negative thrust
  ControlInput in = from_deviation(u, p);
  CHECK(in.thrust == doctest::Approx(0.0));

  u(0) = 5.0 * hover;  // beyond the upper limit
  in = from_deviation(u, p);
  CHECK(in.thrust == doctest::Approx(p.thrust_limit()));

  u << 3.0, 0.01, -0.02, 0.005;
  in = from_deviation(u, p);
  const ControlVector back = to_deviation(in, p);
  CHECK((back - u).norm() < 1e-12);
}

TEST_CASE("hover is an equilibrium of the nonlinear dynamics") {
  QuadrotorParams p;
  const StateVector d = nonlinear_derivative(hover_state(), hover_input(p), p);
  CHECK(d.norm() == doctest::Approx(0.0));
}

TEST_CASE("free fall accelerates straight down") {
  QuadrotorParams p;
  PlantState s = hover_state();
  ControlInput u;
  u.thrust = 0.0;
  u.torque.setZero();
  const StateVector d = nonlinear_derivative(s, u, p);
  CHECK(d(idx::vz) == doctest::Approx(-p.gravity));
  for (int i = 0; i < 12; ++i) {
    if (i != idx::vz) CHECK(d(i) == doctest::Approx(0.0));
  }
}

TEST_CASE("dynamics are invariant under position translation") {
  QuadrotorParams p;
  PlantState a = hover_state();
  a.attitude << 0.2, -0.1, 0.4;
  a.velocity << 0.5, 0.1, -0.3;
  a.attitude_rate << 0.05, 0.1, -0.2;
  PlantState b = a;
  b.position += Eigen::Vector3d(10.0, -20.0, 5.0);
  ControlInput u;
  u.thrust = 20.0;
  u.torque << 0.01, -0.02, 0.03;
  CHECK((nonlinear_derivative(a, u, p) - nonlinear_derivative(b, u, p)).norm() ==
        0.0);
}

TEST_CASE("the linearization matches a finite-difference jacobian at hover") {
  QuadrotorParams p;
  const auto [a, b] = continuous_linear_matrices(p);
  const PlantState s0 = hover_state();
  const ControlInput u0 = hover_input(p);
  const double eps = 1e-6;

  // State jacobian (position columns are zero by translation invariance).
  for (int j = 0; j < 12; ++j) {
    StateVector plus = s0.as_vector();
    StateVector minus = s0.as_vector();
    plus(j) += eps;
    minus(j) -= eps;
    const StateVector col =
        (nonlinear_derivative(PlantState::from_vector(plus), u0, p) -
         nonlinear_derivative(PlantState::from_vector(minus), u0, p)) /
        (2.0 * eps);
    CHECK((col - a.col(j)).cwiseAbs().maxCoeff() < 1e-5);
  }

  // Input jacobian in deviation coordinates.
  for (int j = 0; j < 4; ++j) {
    ControlVector up = ControlVector::Zero();
    ControlVector um = ControlVector::Zero();
    up(j) += eps;
    um(j) -= eps;
    const StateVector col =
        (nonlinear_derivative(s0, from_deviation(up, p), p) -
         nonlinear_derivative(s0, from_deviation(um, p), p)) /
        (2.0 * eps);
    CHECK((col - b.col(j)).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("the continuous linear model has the expected sparsity") {
  QuadrotorParams p;
  const auto [a, b] = continuous_linear_matrices(p);

  int nonzeros = 0;
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j)
      if (a(i, j) != 0.0) ++nonzeros;
  CHECK(nonzeros == 8);
  for (int i = 0; i < 6; ++i) CHECK(a(i, i + 6) == doctest::Approx(1.0));
  CHECK(a(idx::vx, idx::pitch) == doctest::Approx(p.gravity));
  CHECK(a(idx::vy, idx::roll) == doctest::Approx(-p.gravity));

  int b_nonzeros = 0;
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 4; ++j)
      if (b(i, j) != 0.0) ++b_nonzeros;
  CHECK(b_nonzeros == 4);
  CHECK(b(idx::vz, 0) == doctest::Approx(1.0 / p.mass));
  CHECK(b(idx::roll_rate, 1) == doctest::Approx(1.0 / p.inertia_x));
  CHECK(b(idx::pitch_rate, 2) == doctest::Approx(1.0 / p.inertia_y));
  CHECK(b(idx::yaw_rate, 3) == doctest::Approx(1.0 / p.inertia_z));
}

TEST_CASE("the drift matrix is nilpotent of index 4") {
  QuadrotorParams p;
  const Matrix a = continuous_linear_matrices(p).a;
  const Matrix a3 = a * a * a;
  CHECK(a3.cwiseAbs().maxCoeff() == doctest::Approx(p.gravity));
  // Tilt rate reaches position after three integrations.
  CHECK(a3(idx::x, idx::pitch_rate) == doctest::Approx(p.gravity));
  CHECK((a3 * a).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zoh discretization equals the terminating matrix series") {
  QuadrotorParams p;
  const auto [a, b] = continuous_linear_matrices(p);
  const double h = p.control_period;
  const auto dm = build_discrete_model(p, Spd::scaled_identity(12, 1.0),
                                       Spd::scaled_identity(9, 1.0));

  // With a^4 = 0 both series terminate: four terms suffice and are exact.
  const Matrix eye = Matrix::Identity(12, 12);
  const Matrix phi_exact =
      eye + a * h + a * a * (h * h / 2.0) + a * a * a * (h * h * h / 6.0);
  const Matrix gamma_exact =
      (eye * h + a * (h * h / 2.0) + a * a * (h * h * h / 6.0) +
       a * a * a * (h * h * h * h / 24.0)) *
      b;
  CHECK((dm.phi - phi_exact).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((dm.gamma - gamma_exact).cwiseAbs().maxCoeff() < 1e-14);

  // Tilt couples into along-track position at second order in h.
  CHECK(dm.phi(idx::x, idx::pitch) ==
        doctest::Approx(p.gravity * h * h / 2.0).epsilon(1e-12));
  CHECK(dm.phi(idx::x, idx::pitch_rate) ==
        doctest::Approx(p.gravity * h * h * h / 6.0).epsilon(1e-12));
  CHECK(dm.h == doctest::Approx(h));
}

TEST_CASE("measurement matrix stacks two position blocks and attitude") {
  const Matrix c = measurement_matrix();
  REQUIRE(c.rows() == 9);
  REQUIRE(c.cols() == 12);
  Matrix expect = Matrix::Zero(9, 12);
  expect.block<3, 3>(0, 0).setIdentity();
  expect.block<3, 3>(3, 0).setIdentity();
  expect.block<3, 3>(6, 3).setIdentity();
  CHECK((c - expect).norm() == 0.0);
}

TEST_CASE("build_discrete_model validates covariance sizes") {
  QuadrotorParams p;
  CHECK_THROWS_AS(build_discrete_model(p, Spd::scaled_identity(11, 1.0),
                                       Spd::scaled_identity(9, 1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_discrete_model(p, Spd::scaled_identity(12, 1.0),
                                       Spd::scaled_identity(8, 1.0)),
                  std::invalid_argument);
  const auto dm = build_discrete_model(p, Spd::scaled_identity(12, 2.0),
                                       Spd::scaled_identity(9, 3.0));
  CHECK(dm.w.matrix()(0, 0) == doctest::Approx(2.0));
  CHECK(dm.v.matrix()(8, 8) == doctest::Approx(3.0));
}

}  // TEST_SUITE
