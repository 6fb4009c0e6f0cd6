#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace quadfusion {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

// Iterative routine failed to meet its tolerance (DARE divergence, singular
// innovation covariance, ...). Carries the last residual for diagnostics.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// 0.5 * (m + m^T)
Matrix symmetrize(const Matrix& m);

// Symmetric PSD/PD matrix validated at construction. Symmetry is required to
// 1e-12 relative tolerance; eigenvalues >= -1e-12 * lambda_max (psd) or > 0 (pd).
class Spd {
 public:
  // Empty (0 x 0) placeholder so aggregates holding covariances stay
  // default-constructible; every real instance comes from a factory.
  Spd() : m_(0, 0), pd_(false) {}

  static Spd psd(const Matrix& m);
  static Spd pd(const Matrix& m);
  static Spd diagonal(const Vector& d);  // psd from a nonnegative diagonal
  static Spd scaled_identity(Eigen::Index n, double c) {
    return diagonal(Vector::Constant(n, c));
  }

  const Matrix& matrix() const { return m_; }
  Eigen::Index size() const { return m_.rows(); }
  bool is_pd() const { return pd_; }

 private:
  Spd(Matrix m, bool pd) : m_(std::move(m)), pd_(pd) {}
  Matrix m_;
  bool pd_;
};

// e^a by scaling-and-squaring on a truncated Taylor series.
Matrix mat_exp(const Matrix& a);

struct ZohResult {
  Matrix phi;    // n x n
  Matrix gamma;  // n x m
};

// Zero-order-hold discretization over step h via the augmented-matrix
// exponential exp([[a, b], [0, 0]] * h).
ZohResult discretize_zoh(const Matrix& a, const Matrix& b, double h);

struct DareOptions {
  int max_iterations = 10000;
  double tolerance = 1e-9;  // on ||S - f(S)||_inf relative to 1 + ||S||_inf
};

// Fixed-point iteration of S <- q + phi^T S phi - phi^T S gamma
// (gamma^T S gamma + r)^-1 gamma^T S phi starting from S = q.
Matrix solve_dare(const Matrix& phi, const Matrix& gamma, const Spd& q,
                  const Spd& r, const DareOptions& opts = {});

// ||S - f(S)||_inf for the map above; used to verify returned solutions.
double dare_residual(const Matrix& s, const Matrix& phi, const Matrix& gamma,
                     const Matrix& q, const Matrix& r);

double spectral_radius(const Matrix& m);

// Draw from N(mean, cov). cov must be symmetric PSD (semidefinite fine,
// including all-zero); indefinite input is rejected. Always consumes
// mean.size() normal variates so call sites stay stream-aligned.
Vector sample_mvn(const Vector& mean, const Matrix& cov, Rng& rng);
inline Vector sample_mvn(const Vector& mean, const Spd& cov, Rng& rng) {
  return sample_mvn(mean, cov.matrix(), rng);
}

// splitmix64 mix; used to derive independent named streams from one seed.
std::uint64_t splitmix64(std::uint64_t x);
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

}  // namespace quadfusion
