#include "hloc/covisibility.hpp"

#include <algorithm>
#include <unordered_map>

#include "hloc/errors.hpp"

namespace hloc {

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];  // path halving
    x = parent[x];
  }
  return x;
}

}  // namespace

std::vector<Place> cluster_priors(const VisualMap& map,
                                  std::span<const std::int64_t> prior_ids) {
  if (prior_ids.empty()) throw ValidationError("clustering: empty prior list");

  std::vector<std::int64_t> frames(prior_ids.begin(), prior_ids.end());
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());

  std::vector<std::size_t> parent(frames.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;

  // Union frames through shared landmarks: the first frame seen to observe a
  // landmark becomes the anchor every later observer is merged into.
  std::unordered_map<std::int64_t, std::size_t> landmark_anchor;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    for (std::int64_t lm : map.observed_landmarks(frames[i])) {
      auto [it, inserted] = landmark_anchor.emplace(lm, i);
      if (!inserted) {
        const std::size_t a = find_root(parent, i);
        const std::size_t b = find_root(parent, it->second);
        if (a != b) parent[a] = b;
      }
    }
  }

  std::unordered_map<std::size_t, std::size_t> root_to_place;
  std::vector<Place> places;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::size_t root = find_root(parent, i);
    auto [it, inserted] = root_to_place.emplace(root, places.size());
    if (inserted) places.emplace_back();
    places[it->second].keyframe_ids.push_back(frames[i]);  // ascending: frames is sorted
  }

  for (Place& place : places)
    place.landmark_ids = landmarks_of_keyframes(map, place.keyframe_ids);

  std::sort(places.begin(), places.end(), [](const Place& a, const Place& b) {
    if (a.keyframe_ids.size() != b.keyframe_ids.size())
      return a.keyframe_ids.size() > b.keyframe_ids.size();
    return a.keyframe_ids.front() < b.keyframe_ids.front();
  });
  for (std::size_t i = 0; i < places.size(); ++i) places[i].rank = static_cast<int>(i);
  return places;
}

}  // namespace hloc
