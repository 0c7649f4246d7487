#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hloc/geometry.hpp"
#include "hloc/matching.hpp"

namespace hloc {

struct RansacParams {
  double reprojection_threshold_px = 3.0;
  double confidence = 0.99;
  int max_iterations = 1000;
  int min_inliers = 12;
  std::uint64_t rng_seed = 42;
  bool refine = true;  // Levenberg-Marquardt polish over the inlier set
};

struct PoseEstimate {
  Pose pose;
  std::vector<Match2D3D> inlier_matches;  // input order, re-validated post-refinement
  int num_iterations_used = 0;
};

enum class NoPoseReason { kInsufficientMatches, kInsufficientInliers };

/// Estimate or an explained failure — failing to localize is an expected
/// outcome, not an exception.
struct PnpOutcome {
  std::optional<PoseEstimate> estimate;
  NoPoseReason failure_reason = NoPoseReason::kInsufficientMatches;
};

/// Minimal absolute-pose solver. bearings are unit viewing rays in the
/// camera frame; points are world coordinates. Returns every pose (up to 4)
/// satisfying angle(R*p_i + t, bearing_i) < 1e-6 rad. Throws ValidationError
/// on collinear/coincident points or coincident bearings.
std::vector<Pose> solve_p3p(const std::array<Eigen::Vector3d, 3>& bearings,
                            const std::array<Eigen::Vector3d, 3>& points);

/// P3P-RANSAC with one final refinement pass. landmark_position resolves a
/// landmark id to its world position. Deterministic given params.rng_seed.
PnpOutcome ransac_pnp(const std::vector<Match2D3D>& matches,
                      const std::function<Eigen::Vector3d(std::int64_t)>& landmark_position,
                      const QueryFrame& query, const RansacParams& params);

/// Pieces of the refinement cost, exposed so the analytic Jacobian can be
/// verified against finite differences.
///
/// The increment is a 6-vector (rotation vector | translation) applied on
/// the left: pose' = compose({exp(w), dt}, pose).
Pose apply_increment(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta);

/// Residual pi(R*p + t) - observed, in pixels. The point must be in front.
Eigen::Vector2d reprojection_residual(const PinholeCamera& camera, const Pose& pose,
                                      const Eigen::Vector3d& point_world,
                                      const Eigen::Vector2d& observed_px);

/// d residual / d increment at delta = 0.
Eigen::Matrix<double, 2, 6> reprojection_jacobian(const PinholeCamera& camera, const Pose& pose,
                                                  const Eigen::Vector3d& point_world);

}  // namespace hloc
