#include "hloc/matching.hpp"

#include <algorithm>
#include <map>

#include "hloc/errors.hpp"

namespace hloc {

LandmarkMatcher::LandmarkMatcher(const VisualMap& map,
                                 std::span<const std::int64_t> landmark_ids)
    : dim_(map.local_descriptor_dim()) {
  Eigen::Index num_entries = 0;
  for (std::int64_t id : landmark_ids)
    num_entries += static_cast<Eigen::Index>(map.landmark(id).observations.size());
  if (num_entries == 0) return;

  Eigen::MatrixXf entries(dim_, num_entries);
  std::vector<std::int64_t> entry_ids(static_cast<std::size_t>(num_entries));
  entry_landmark_.resize(static_cast<std::size_t>(num_entries));
  Eigen::Index at = 0;
  for (std::int64_t id : landmark_ids) {
    for (const Observation& obs : map.landmark(id).observations) {
      entries.col(at) = map.observation_descriptor(obs);
      entry_landmark_[static_cast<std::size_t>(at)] = id;
      entry_ids[static_cast<std::size_t>(at)] = at;
      ++at;
    }
  }
  tree_ = KdTree<float>::build(dim_, entries, std::move(entry_ids));
}

std::vector<Match2D3D> LandmarkMatcher::match(const QueryFrame& query,
                                              const MatchParams& params) const {
  if (params.epsilon < 0.0) throw ValidationError("matching: epsilon must be >= 0");
  if (params.ratio_threshold <= 0.0 || params.ratio_threshold > 1.0)
    throw ValidationError("matching: ratio threshold must be in (0, 1]");
  const Eigen::Index num_entries = this->num_entries();
  if (num_entries == 0 || query.num_keypoints() == 0) return {};
  if (query.local_descriptors.rows() != dim_)
    throw ValidationError("matching: query descriptor dimension " +
                          std::to_string(query.local_descriptors.rows()) +
                          " does not match map dimension " + std::to_string(dim_));

  const double ratio_sq = params.ratio_threshold * params.ratio_threshold;
  // Best keypoint per landmark: (distance, keypoint_index), lower wins.
  std::map<std::int64_t, std::pair<float, Eigen::Index>> best;
  for (Eigen::Index kp = 0; kp < query.num_keypoints(); ++kp) {
    const Eigen::VectorXf q = query.local_descriptors.col(kp);

    // 2-NN, but the second neighbor must come from a different landmark;
    // widen the search until one appears or the entries are exhausted.
    std::vector<Neighbor<float>> found;
    std::int64_t second_landmark = -1;
    double second_distance = 0.0;
    for (int k = 2;; k *= 2) {
      found = tree_.knn(q, k, params.epsilon);
      for (std::size_t i = 1; i < found.size(); ++i) {
        const std::int64_t lm = entry_landmark_[static_cast<std::size_t>(found[i].id)];
        if (lm != entry_landmark_[static_cast<std::size_t>(found[0].id)]) {
          second_landmark = lm;
          second_distance = static_cast<double>(found[i].distance_sq);
          break;
        }
      }
      if (second_landmark >= 0 || static_cast<Eigen::Index>(found.size()) == num_entries) break;
    }

    const std::int64_t landmark = entry_landmark_[static_cast<std::size_t>(found[0].id)];
    const float distance = found[0].distance_sq;
    if (static_cast<double>(distance) > params.max_descriptor_distance) continue;
    // Squared distances, so the ratio gate is d1 <= r^2 * d2. No second
    // landmark at all means the test cannot reject (vacuous pass).
    if (second_landmark >= 0 && static_cast<double>(distance) > ratio_sq * second_distance)
      continue;

    auto [it, inserted] = best.try_emplace(landmark, distance, kp);
    if (!inserted && distance < it->second.first) it->second = {distance, kp};
  }

  std::vector<Match2D3D> matches;
  matches.reserve(best.size());
  for (const auto& [landmark, hit] : best)
    matches.push_back({hit.second, landmark, hit.first});
  std::sort(matches.begin(), matches.end(),
            [](const Match2D3D& a, const Match2D3D& b) {
              return a.keypoint_index < b.keypoint_index;
            });
  return matches;
}

std::vector<Match2D3D> match_place(const VisualMap& map, const Place& place,
                                   const QueryFrame& query, const MatchParams& params) {
  if (place.keyframe_ids.empty()) throw ValidationError("matching: empty place");
  return LandmarkMatcher(map, place.landmark_ids).match(query, params);
}

std::vector<Match2D3D> match_all(const VisualMap& map, const QueryFrame& query,
                                 const MatchParams& params) {
  std::vector<std::int64_t> ids;
  ids.reserve(map.landmarks().size());
  for (const Landmark& lm : map.landmarks()) ids.push_back(lm.id);
  return LandmarkMatcher(map, ids).match(query, params);
}

}  // namespace hloc
