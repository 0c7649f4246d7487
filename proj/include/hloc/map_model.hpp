#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hloc/geometry.hpp"

namespace hloc {

struct CameraRecord {
  std::int64_t id = 0;
  PinholeCamera model;
};

/// A mapped image: pose, one global descriptor, and per-keypoint local
/// descriptors stored column-wise (local_descriptors.col(i) describes
/// keypoints.col(i)).
struct Keyframe {
  std::int64_t id = 0;
  std::int64_t camera_id = 0;
  Pose pose;
  Eigen::VectorXf global_descriptor;
  Eigen::Matrix2Xd keypoints;
  Eigen::MatrixXf local_descriptors;

  Eigen::Index num_keypoints() const { return keypoints.cols(); }
};

struct Observation {
  std::int64_t keyframe_id = 0;
  Eigen::Index keypoint_index = 0;
};

/// A triangulated scene point and the keyframe keypoints that observe it.
struct Landmark {
  std::int64_t id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  std::vector<Observation> observations;
};

/// The sparse visual map: keyframes and landmarks linked by observations
/// (a bipartite graph). Immutable once constructed; the constructor enforces
/// every structural invariant, so all loaded maps are valid by construction.
class VisualMap {
 public:
  static constexpr int kFormatVersion = 1;

  VisualMap(std::vector<CameraRecord> cameras, Eigen::Index global_descriptor_dim,
            Eigen::Index local_descriptor_dim, std::vector<Keyframe> keyframes,
            std::vector<Landmark> landmarks);

  Eigen::Index global_descriptor_dim() const { return global_dim_; }
  Eigen::Index local_descriptor_dim() const { return local_dim_; }

  const std::vector<CameraRecord>& cameras() const { return cameras_; }
  const std::vector<Keyframe>& keyframes() const { return keyframes_; }
  const std::vector<Landmark>& landmarks() const { return landmarks_; }

  const PinholeCamera& camera(std::int64_t camera_id) const;
  const Keyframe& keyframe(std::int64_t keyframe_id) const;
  const Landmark& landmark(std::int64_t landmark_id) const;
  bool has_keyframe(std::int64_t keyframe_id) const;

  /// Landmark ids observed by one keyframe, ascending.
  const std::vector<std::int64_t>& observed_landmarks(std::int64_t keyframe_id) const;

  /// Local descriptor behind one observation.
  Eigen::VectorXf observation_descriptor(const Observation& obs) const {
    return keyframe(obs.keyframe_id).local_descriptors.col(obs.keypoint_index);
  }

 private:
  std::size_t keyframe_slot(std::int64_t id) const;

  std::vector<CameraRecord> cameras_;
  Eigen::Index global_dim_ = 0;
  Eigen::Index local_dim_ = 0;
  std::vector<Keyframe> keyframes_;   // ascending id
  std::vector<Landmark> landmarks_;   // ascending id
  std::unordered_map<std::int64_t, std::size_t> camera_slots_;
  std::unordered_map<std::int64_t, std::size_t> keyframe_slots_;
  std::unordered_map<std::int64_t, std::size_t> landmark_slots_;
  std::vector<std::vector<std::int64_t>> reverse_index_;  // keyframe slot -> landmark ids
};

/// Union of landmarks observed by the given keyframes, ascending id.
/// Throws ValidationError on an unknown keyframe id.
std::vector<std::int64_t> landmarks_of_keyframes(const VisualMap& map,
                                                 std::span<const std::int64_t> keyframe_ids);

enum class MapFormat {
  kText,    // descriptors inline in the document
  kBinary,  // descriptors in a little-endian float32 sidecar next to the file
};

/// Writes the map. Binary mode produces <path> plus a sidecar named after it;
/// saving the same map twice yields byte-identical files.
void save_map(const VisualMap& map, const std::filesystem::path& path,
              MapFormat format = MapFormat::kBinary);

/// Reads and fully validates a map written by save_map.
VisualMap load_map(const std::filesystem::path& path);

}  // namespace hloc
