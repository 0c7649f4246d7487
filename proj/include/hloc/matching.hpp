#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "hloc/covisibility.hpp"
#include "hloc/geometry.hpp"
#include "hloc/kdtree.hpp"
#include "hloc/map_model.hpp"

namespace hloc {

/// One localization request: precomputed descriptors and keypoints for a
/// single image. Ground-truth fields are carried for evaluation only and
/// never influence localization.
struct QueryFrame {
  std::int64_t id = 0;
  std::int64_t camera_id = 0;
  PinholeCamera camera;
  Eigen::VectorXf global_descriptor;
  Eigen::Matrix2Xd keypoints;
  Eigen::MatrixXf local_descriptors;  // dim x |keypoints|
  std::optional<Pose> gt_pose;
  std::int64_t true_place = -1;  // which synthetic place generated it; -1 when unknown

  Eigen::Index num_keypoints() const { return keypoints.cols(); }
};

/// A 2D-3D correspondence: query keypoint <-> map landmark.
struct Match2D3D {
  Eigen::Index keypoint_index = 0;
  std::int64_t landmark_id = 0;
  float descriptor_distance = 0.0f;  // squared Euclidean
};

struct MatchParams {
  /// Approximate-search slack of the descriptor k-d tree (0 = exact).
  double epsilon = 3.0;
  /// Lowe ratio on (non-squared) distances, tested against the nearest
  /// neighbor of a *different* landmark; 1.0 disables the test. A keypoint
  /// whose candidates all come from one landmark passes vacuously.
  double ratio_threshold = 0.8;
  /// Absolute gate on the squared descriptor distance; +inf disables.
  double max_descriptor_distance = std::numeric_limits<double>::infinity();
};

/// Reusable 2D-3D matcher over a fixed landmark set: a k-d tree over all
/// observation descriptors of those landmarks, built once, queried many
/// times. Tree entries are observation slots; a side array maps each entry
/// back to its landmark.
class LandmarkMatcher {
 public:
  LandmarkMatcher(const VisualMap& map, std::span<const std::int64_t> landmark_ids);

  /// Matches query keypoints against the indexed descriptors. Each landmark
  /// keeps only its best keypoint (lowest distance, ties to the lower
  /// keypoint index); output is sorted by keypoint_index, with keypoint and
  /// landmark ids unique.
  std::vector<Match2D3D> match(const QueryFrame& query, const MatchParams& params) const;

  Eigen::Index num_entries() const { return static_cast<Eigen::Index>(entry_landmark_.size()); }

 private:
  Eigen::Index dim_ = 0;
  std::vector<std::int64_t> entry_landmark_;
  KdTree<float> tree_;
};

/// Matches query keypoints against the observation descriptors of one
/// place's landmarks (one-shot convenience over LandmarkMatcher).
std::vector<Match2D3D> match_place(const VisualMap& map, const Place& place,
                                   const QueryFrame& query, const MatchParams& params);

/// The direct baseline: identical rules over every landmark in the map.
std::vector<Match2D3D> match_all(const VisualMap& map, const QueryFrame& query,
                                 const MatchParams& params);

}  // namespace hloc
