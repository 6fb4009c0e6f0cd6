#include "quadfusion/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace quadfusion {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Spd Spd::psd(const Matrix& m) {
  require(m.rows() == m.cols(), "Spd: matrix must be square");
  require(all_finite(m), "Spd: matrix must be finite");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
          "Spd: matrix not symmetric");
  const Matrix sym = symmetrize(m);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  require(es.eigenvalues().minCoeff() >= -1e-12 * std::max(lmax, 0.0),
          "Spd: matrix not positive semidefinite");
  return Spd(sym, false);
}

Spd Spd::pd(const Matrix& m) {
  Spd s = psd(m);
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.m_, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() > 0.0,
          "Spd: matrix not positive definite");
  s.pd_ = true;
  return s;
}

Spd Spd::diagonal(const Vector& d) {
  require(d.allFinite() && (d.array() >= 0.0).all(),
          "Spd: diagonal entries must be nonnegative");
  return Spd(Matrix(d.asDiagonal()), (d.array() > 0.0).all());
}

Matrix mat_exp(const Matrix& a) {
  require(a.rows() == a.cols(), "mat_exp: matrix must be square");
  require(all_finite(a), "mat_exp: matrix must be finite");
  const Eigen::Index n = a.rows();
  if (n == 0) return a;

  // scale so the series argument has norm <= 0.5, then square back
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Matrix as = a / std::pow(2.0, squarings);

  Matrix result = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k <= 40; ++k) {
    term = (term * as) / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() <
        1e-17 * std::max(1.0, result.cwiseAbs().maxCoeff()))
      break;
  }
  for (int k = 0; k < squarings; ++k) result = result * result;
  return result;
}

ZohResult discretize_zoh(const Matrix& a, const Matrix& b, double h) {
  require(a.rows() == a.cols(), "discretize_zoh: a must be square");
  require(b.rows() == a.rows(), "discretize_zoh: a/b row mismatch");
  require(std::isfinite(h) && h > 0.0, "discretize_zoh: step must be positive");
  const Eigen::Index n = a.rows(), m = b.cols();
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = a;
  aug.topRightCorner(n, m) = b;
  const Matrix e = mat_exp(aug * h);
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

double dare_residual(const Matrix& s, const Matrix& phi, const Matrix& gamma,
                     const Matrix& q, const Matrix& r) {
  const Matrix g = gamma.transpose() * s * gamma + r;
  const Matrix l = g.ldlt().solve(gamma.transpose() * s * phi);
  const Matrix next = q + phi.transpose() * s * (phi - gamma * l);
  return (symmetrize(next) - s).cwiseAbs().maxCoeff();
}

Matrix solve_dare(const Matrix& phi, const Matrix& gamma, const Spd& q,
                  const Spd& r, const DareOptions& opts) {
  const Eigen::Index n = phi.rows(), m = gamma.cols();
  require(phi.cols() == n, "solve_dare: phi must be square");
  require(gamma.rows() == n, "solve_dare: gamma row mismatch");
  require(q.size() == n, "solve_dare: q size mismatch");
  require(r.size() == m && r.is_pd(), "solve_dare: r must be pd of input size");

  Matrix s = q.matrix();
  double res = 0.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Matrix g = gamma.transpose() * s * gamma + r.matrix();
    Eigen::LDLT<Matrix> ldlt(g);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("solve_dare: inner solve failed");
    const Matrix l = ldlt.solve(gamma.transpose() * s * phi);
    const Matrix next =
        symmetrize(q.matrix() + phi.transpose() * s * (phi - gamma * l));
    res = (next - s).cwiseAbs().maxCoeff();
    const bool done = res < opts.tolerance * (1.0 + s.cwiseAbs().maxCoeff());
    s = next;
    if (done) return s;
  }
  throw NumericalError("solve_dare: no convergence within max iterations", res);
}

double spectral_radius(const Matrix& m) {
  require(m.rows() == m.cols(), "spectral_radius: matrix must be square");
  require(all_finite(m), "spectral_radius: matrix must be finite");
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Vector sample_mvn(const Vector& mean, const Matrix& cov, Rng& rng) {
  const Eigen::Index n = mean.size();
  require(cov.rows() == n && cov.cols() == n, "sample_mvn: size mismatch");
  require(all_finite(cov) && mean.allFinite(), "sample_mvn: non-finite input");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  require((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale,
          "sample_mvn: covariance not symmetric");

  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);

  // cov = P^T L D L^T P; draw = mean + P^T L sqrt(D) z
  Eigen::LDLT<Matrix> ldlt(symmetrize(cov));
  Vector d = ldlt.vectorD();
  const double dmax = (n > 0) ? d.maxCoeff() : 0.0;
  if (d.minCoeff() < -1e-10 * std::max(1.0, dmax))
    throw std::invalid_argument("sample_mvn: covariance not PSD");
  d = d.cwiseMax(0.0);

  Vector y = d.cwiseSqrt().cwiseProduct(z);
  y = ldlt.matrixL() * y;
  y = ldlt.transpositionsP().transpose() * y;
  return mean + y;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ (stream * 0x9e3779b97f4a7c15ULL)));
}

}  // namespace quadfusion
