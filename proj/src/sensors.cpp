#include "quadfusion/sensors.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace quadfusion::sensors {

namespace {

bool all_finite(const Eigen::Vector3d& v) { return v.allFinite(); }

}  // namespace

AnchorSet::AnchorSet(std::vector<Eigen::Vector3d> anchors)
    : anchors_(std::move(anchors)) {
  if (anchors_.size() < 4) {
    throw std::invalid_argument("anchor set needs at least 4 anchors");
  }
  for (const auto& a : anchors_) {
    if (!all_finite(a)) {
      throw std::invalid_argument("anchor coordinates must be finite");
    }
  }
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    for (std::size_t j = i + 1; j < anchors_.size(); ++j) {
      if ((anchors_[i] - anchors_[j]).norm() < 1e-9) {
        throw std::invalid_argument("anchor set contains duplicate points");
      }
    }
  }
  // Non-coplanar <=> the difference vectors from the first anchor span R^3.
  Eigen::MatrixXd d(anchors_.size() - 1, 3);
  for (std::size_t i = 1; i < anchors_.size(); ++i) {
    d.row(static_cast<Eigen::Index>(i - 1)) = (anchors_[i] - anchors_[0]).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
  const auto& sv = svd.singularValues();
  if (sv(2) <= 1e-9 * std::max(1.0, sv(0))) {
    throw std::invalid_argument("anchor set is coplanar");
  }
}

void LandmarkSet::validate() const {
  if (!(max_range > 0.0)) {
    throw std::invalid_argument("landmark max_range must be positive");
  }
  if (!(fov_half_angle > 0.0) || fov_half_angle > M_PI) {
    throw std::invalid_argument("landmark fov_half_angle must lie in (0, pi]");
  }
  for (const auto& l : landmarks) {
    if (!all_finite(l)) {
      throw std::invalid_argument("landmark coordinates must be finite");
    }
  }
}

void DropoutConfig::validate() const {
  for (double p : {p_uwb, p_yolo, p_imu}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("sensor availability probabilities must lie in [0, 1]");
    }
  }
  if (uwb_blackout && !(uwb_blackout->first <= uwb_blackout->second)) {
    throw std::invalid_argument("uwb blackout band must satisfy lo <= hi");
  }
}

std::vector<std::size_t> visible_landmarks(const model::PlantState& truth,
                                           const LandmarkSet& landmarks) {
  std::vector<std::size_t> out;
  const Eigen::Vector3d axis(std::cos(truth.attitude.z()),
                             std::sin(truth.attitude.z()), 0.0);
  const double cos_limit = std::cos(landmarks.fov_half_angle);
  for (std::size_t i = 0; i < landmarks.landmarks.size(); ++i) {
    const Eigen::Vector3d d = landmarks.landmarks[i] - truth.position;
    const double dist = d.norm();
    if (dist > landmarks.max_range) continue;
    // A landmark on top of the camera is trivially in view.
    if (dist < 1e-12 || d.dot(axis) >= cos_limit * dist) {
      out.push_back(i);
    }
  }
  return out;
}

AvailabilityMask availability_step(const DropoutConfig& cfg,
                                   const model::PlantState& truth, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u_uwb = unif(rng);
  const double u_yolo = unif(rng);
  const double u_imu = unif(rng);

  AvailabilityMask mask;
  mask.uwb = u_uwb < cfg.p_uwb;
  mask.yolo = u_yolo < cfg.p_yolo;
  mask.imu = u_imu < cfg.p_imu;

  if (cfg.uwb_blackout && truth.position.x() >= cfg.uwb_blackout->first &&
      truth.position.x() <= cfg.uwb_blackout->second) {
    mask.uwb = false;
  }
  return mask;
}

void force_visibility(AvailabilityMask& mask, const model::PlantState& truth,
                      const LandmarkSet& landmarks) {
  if (mask.yolo && visible_landmarks(truth, landmarks).size() < 3) {
    mask.yolo = false;
  }
}

Eigen::Vector3d sense_imu(const model::PlantState& truth, double noise_var,
                          Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(noise_var));
  Eigen::Vector3d noise;
  for (int i = 0; i < 3; ++i) noise(i) = normal(rng);
  return truth.attitude + noise;
}

Vector uwb_ranges(const Eigen::Vector3d& tag, const AnchorSet& anchors,
                  double noise_std, Rng& rng) {
  std::normal_distribution<double> normal(0.0, noise_std);
  Vector ranges(static_cast<Eigen::Index>(anchors.size()));
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double r = (tag - anchors.anchors()[i]).norm() + normal(rng);
    ranges(static_cast<Eigen::Index>(i)) = std::max(r, 0.0);
  }
  return ranges;
}

std::optional<Eigen::Vector3d> solve_spheres(
    const std::vector<Eigen::Vector3d>& centers, const Vector& ranges,
    std::optional<double> z_hint, std::optional<double> gate, bool refine) {
  const auto n = static_cast<Eigen::Index>(centers.size());
  if (n < 3 || ranges.size() != n) return std::nullopt;

  // Subtracting the first sphere equation from the rest eliminates the
  // quadratic term and leaves a linear system in the unknown position.
  Eigen::MatrixXd a(n - 1, 3);
  Eigen::VectorXd b(n - 1);
  const Eigen::Vector3d& c0 = centers[0];
  const double r0 = ranges(0);
  for (Eigen::Index i = 1; i < n; ++i) {
    const Eigen::Vector3d& ci = centers[static_cast<std::size_t>(i)];
    a.row(i - 1) = 2.0 * (ci - c0).transpose();
    b(i - 1) = r0 * r0 - ranges(i) * ranges(i) + ci.squaredNorm() - c0.squaredNorm();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double thresh = std::max(1e-3 * sv(0), 1e-9);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > thresh) ++rank;
  }

  Eigen::Vector3d p;
  if (rank >= 3) {
    p = svd.solve(b);
  } else if (rank == 2) {
    // Coplanar centers: the linear system only pins down the in-plane
    // component. Recover the out-of-plane offset from the sphere radii and
    // use z_hint to break the mirror symmetry.
    if (!z_hint) return std::nullopt;
    svd.setThreshold(thresh / std::max(sv(0), 1e-300));
    const Eigen::Vector3d p_min = svd.solve(b);
    const Eigen::Vector3d v = svd.matrixV().col(2);
    // v is orthogonal to every center difference, so beta is center-invariant;
    // averaging alpha over all spheres damps the range noise.
    const double beta = v.dot(p_min - c0);
    double alpha = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      alpha += (p_min - centers[static_cast<std::size_t>(i)]).squaredNorm() -
               ranges(i) * ranges(i);
    }
    alpha /= static_cast<double>(n);
    const double root = std::sqrt(std::max(beta * beta - alpha, 0.0));
    const Eigen::Vector3d cand1 = p_min + (-beta + root) * v;
    const Eigen::Vector3d cand2 = p_min + (-beta - root) * v;
    p = std::abs(cand1.z() - *z_hint) <= std::abs(cand2.z() - *z_hint) ? cand1
                                                                       : cand2;
  } else {
    return std::nullopt;
  }

  if (refine) {
    // One Gauss-Newton step on the range residuals sharpens the linear
    // closed-form fix; the SVD solve keeps the step sane when the geometry is
    // poorly conditioned, and the residual gate catches anything wild.
    Eigen::MatrixXd j(n, 3);
    Eigen::VectorXd f(n);
    bool ok = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Vector3d d = p - centers[static_cast<std::size_t>(i)];
      const double dist = d.norm();
      if (dist < 1e-9) {
        ok = false;
        break;
      }
      j.row(i) = d.transpose() / dist;
      f(i) = dist - ranges(i);
    }
    if (ok) {
      const Eigen::Vector3d step =
          j.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(f);
      if (step.allFinite()) p -= step;
    }
  }

  if (!p.allFinite()) return std::nullopt;
  if (gate) {
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double f = (p - centers[static_cast<std::size_t>(i)]).norm() - ranges(i);
      ss += f * f;
    }
    if (std::sqrt(ss / static_cast<double>(n)) > *gate) return std::nullopt;
  }
  return p;
}

std::optional<Eigen::Vector3d> multilaterate(const Vector& ranges,
                                             const AnchorSet& anchors,
                                             double residual_gate) {
  return solve_spheres(anchors.anchors(), ranges, std::nullopt, residual_gate);
}

std::optional<Eigen::Vector3d> sense_yolo(const model::PlantState& truth,
                                          const LandmarkSet& landmarks,
                                          double noise_std, Rng& rng) {
  const auto visible = visible_landmarks(truth, landmarks);
  if (visible.size() < 3) return std::nullopt;

  std::normal_distribution<double> normal(0.0, noise_std);
  std::vector<Eigen::Vector3d> centers;
  centers.reserve(visible.size());
  Vector ranges(static_cast<Eigen::Index>(visible.size()));
  for (std::size_t i = 0; i < visible.size(); ++i) {
    const Eigen::Vector3d& l = landmarks.landmarks[visible[i]];
    centers.push_back(l);
    const double r = (truth.position - l).norm() + normal(rng);
    ranges(static_cast<Eigen::Index>(i)) = std::max(r, 0.0);
  }
  // The detector knows which side of the landmark plane it sits on, so the
  // mirror ambiguity of near-coplanar constellations resolves toward the
  // true altitude.
  const double gate = std::max(0.5, 4.0 * noise_std);
  return solve_spheres(centers, ranges, truth.position.z(), gate);
}

MeasurementFrame assemble_frame(const std::optional<Eigen::Vector3d>& uwb_pos,
                                const std::optional<Eigen::Vector3d>& yolo_pos,
                                const std::optional<Eigen::Vector3d>& imu_att,
                                const AvailabilityMask& mask) {
  MeasurementFrame frame;
  frame.mask.uwb = mask.uwb && uwb_pos.has_value();
  frame.mask.yolo = mask.yolo && yolo_pos.has_value();
  frame.mask.imu = mask.imu && imu_att.has_value();
  if (frame.mask.uwb) frame.y.segment<3>(0) = *uwb_pos;
  if (frame.mask.yolo) frame.y.segment<3>(3) = *yolo_pos;
  if (frame.mask.imu) frame.y.segment<3>(6) = *imu_att;
  return frame;
}

Eigen::Matrix<double, 9, 9> delta_matrix(const AvailabilityMask& mask) {
  Eigen::Matrix<double, 9, 9> delta = Eigen::Matrix<double, 9, 9>::Zero();
  if (mask.uwb) delta.block<3, 3>(0, 0).setIdentity();
  if (mask.yolo) delta.block<3, 3>(3, 3).setIdentity();
  if (mask.imu) delta.block<3, 3>(6, 6).setIdentity();
  return delta;
}

}  // namespace quadfusion::sensors
