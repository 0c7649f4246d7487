#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "hloc/map_model.hpp"
#include "hloc/matching.hpp"

namespace hloc {

/// Knobs of the synthetic world generator. Places are laid out along +x,
/// far enough apart that distinct places never share landmarks or retrieval
/// ground truth; perceptual aliasing is injected explicitly via
/// aliasing_pairs, which duplicate a place's descriptor prototypes (global
/// and local) onto another place while keeping the landmarks themselves
/// distinct.
struct SynthConfig {
  std::uint64_t rng_seed = 42;

  int num_places = 4;
  int keyframes_per_place = 10;
  int landmarks_per_place = 500;
  int queries_per_place = 10;

  double trajectory_spacing_m = 1.0;  // distance between consecutive keyframes

  double keypoint_noise_px = 0.5;
  double local_descriptor_noise_sigma = 0.1;
  double global_descriptor_noise_sigma = 0.05;

  /// (place_a, place_b) pairs whose global AND local descriptor prototype
  /// families are shared; landmark ids and positions stay distinct.
  std::vector<std::pair<int, int>> aliasing_pairs;

  /// Keypoints appended to each query with random pixels and random unit
  /// descriptors, matching nothing in particular.
  int distractor_keypoints_per_query = 0;

  /// Query poses are the base keyframe pose perturbed by up to these amounts
  /// (per-axis uniform position offset; uniform rotation angle about a
  /// random axis).
  double query_offset_position_m = 0.3;
  double query_offset_angle_deg = 10.0;

  /// How many keyframes observe each landmark (capped by visibility), and
  /// how many landmark-backed keypoints each query carries (capped by
  /// visibility from the query pose).
  int observations_per_landmark = 3;
  int query_keypoints = 150;

  /// When positive, landmark prototypes are drawn from a shared pool of this
  /// many unit vectors (without replacement within a place), so the same
  /// descriptor can appear in several places — the classic failure mode of
  /// direct matching. 0 gives every landmark its own prototype. Must be 0 or
  /// >= landmarks_per_place.
  int shared_vocabulary_size = 0;

  Eigen::Index global_descriptor_dim = 64;
  Eigen::Index local_descriptor_dim = 128;
};

struct SynthWorld {
  VisualMap map;
  std::vector<QueryFrame> queries;
};

/// Generates a map and query set, fully determined by the config. Entity
/// classes draw from split RNG streams keyed off the seed, so e.g. raising
/// landmarks_per_place does not perturb keyframe poses.
SynthWorld generate_world(const SynthConfig& config);

/// Query-set persistence, mirroring the map format: a JSON document with
/// ground-truth poses, plus descriptors either inline (text) or in a
/// float32 sidecar (binary). Cameras are stored by id only; after loading,
/// bind_cameras resolves them against a map.
void save_queries(const std::vector<QueryFrame>& queries, const std::filesystem::path& path,
                  MapFormat format = MapFormat::kBinary);
std::vector<QueryFrame> load_queries(const std::filesystem::path& path);
void bind_cameras(std::vector<QueryFrame>& queries, const VisualMap& map);

}  // namespace hloc
