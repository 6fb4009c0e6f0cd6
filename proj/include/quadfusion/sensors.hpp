#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "quadfusion/model.hpp"
#include "quadfusion/numerics.hpp"

namespace quadfusion::sensors {

// UWB anchor constellation; at least 4 pairwise-distinct, non-coplanar points.
class AnchorSet {
 public:
  explicit AnchorSet(std::vector<Eigen::Vector3d> anchors);
  const std::vector<Eigen::Vector3d>& anchors() const { return anchors_; }
  std::size_t size() const { return anchors_.size(); }

 private:
  std::vector<Eigen::Vector3d> anchors_;
};

// Known landmarks sensed by the onboard detector, with a forward-looking
// visibility cone (axis along yaw in the horizontal plane).
struct LandmarkSet {
  std::vector<Eigen::Vector3d> landmarks;
  double max_range = 9.0;        // m
  double fov_half_angle = 1.25;  // rad
  void validate() const;
};

struct AvailabilityMask {
  bool uwb = false;
  bool yolo = false;
  bool imu = false;
  bool operator==(const AvailabilityMask&) const = default;
};

struct DropoutConfig {
  double p_uwb = 0.9;
  double p_yolo = 0.7;
  double p_imu = 1.0;
  // Forced-UWB-outage band on the true x coordinate, [lo, hi].
  std::optional<std::pair<double, double>> uwb_blackout;
  void validate() const;
};

// Stacked measurement: rows 1-3 UWB position, 4-6 landmark position,
// 7-9 IMU attitude; absent blocks are zero.
struct MeasurementFrame {
  Eigen::Matrix<double, 9, 1> y = Eigen::Matrix<double, 9, 1>::Zero();
  AvailabilityMask mask;
};

// Indices of landmarks inside the range/FOV cone from the true pose.
std::vector<std::size_t> visible_landmarks(const model::PlantState& truth,
                                           const LandmarkSet& landmarks);

// Bernoulli draws per sensor (one uniform each, every call, so scenarios that
// differ only in dropout settings stay aligned on the random stream), then
// the blackout band forces UWB off. Landmark-visibility forcing is applied by
// the caller because it only exists for the geometric sensor mode.
AvailabilityMask availability_step(const DropoutConfig& cfg,
                                   const model::PlantState& truth, Rng& rng);

// Drops the detector when fewer than 3 landmarks are in view.
void force_visibility(AvailabilityMask& mask, const model::PlantState& truth,
                      const LandmarkSet& landmarks);

// Attitude measurement with iid N(0, noise_var) per angle.
Eigen::Vector3d sense_imu(const model::PlantState& truth, double noise_var,
                          Rng& rng);

// Ranges to every anchor with iid N(0, noise_std^2), clamped nonnegative.
Vector uwb_ranges(const Eigen::Vector3d& tag, const AnchorSet& anchors,
                  double noise_std, Rng& rng);

// Linear least squares on the differenced sphere equations plus one
// Gauss-Newton refinement; nullopt on degenerate geometry or when the post-fit
// RMS range residual exceeds the gate.
std::optional<Eigen::Vector3d> multilaterate(const Vector& ranges,
                                             const AnchorSet& anchors,
                                             double residual_gate = 0.5);

// Distance-only landmark fix: noisy distances to visible landmarks,
// trilaterated with the same least-squares core; near-coplanar sets resolve
// the mirror ambiguity toward the true altitude. nullopt when fewer than
// 3 landmarks are visible or the fix fails the residual gate.
std::optional<Eigen::Vector3d> sense_yolo(const model::PlantState& truth,
                                          const LandmarkSet& landmarks,
                                          double noise_std, Rng& rng);

MeasurementFrame assemble_frame(const std::optional<Eigen::Vector3d>& uwb_pos,
                                const std::optional<Eigen::Vector3d>& yolo_pos,
                                const std::optional<Eigen::Vector3d>& imu_att,
                                const AvailabilityMask& mask);

// blockdiag(d1 I3, d2 I3, d3 I3)
Eigen::Matrix<double, 9, 9> delta_matrix(const AvailabilityMask& mask);

// Shared sphere-intersection solver. Full-rank sets solve directly; rank-2
// (coplanar/collinear-free) sets need z_hint to pick between the two mirror
// solutions. gate: max allowed RMS range residual (nullopt disables).
std::optional<Eigen::Vector3d> solve_spheres(
    const std::vector<Eigen::Vector3d>& centers, const Vector& ranges,
    std::optional<double> z_hint, std::optional<double> gate, bool refine = true);

}  // namespace quadfusion::sensors
