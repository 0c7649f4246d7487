#include "hloc/covisibility.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <queue>
#include <set>
#include <vector>

#include "hloc/errors.hpp"
#include "hloc/rng.hpp"

using namespace hloc;

namespace {

// Builds a map whose only structure is the frames-landmarks bipartite graph:
// frame i observes exactly graph[i] (landmark ids). Descriptor content is
// irrelevant here.
VisualMap bipartite_map(const std::vector<std::vector<std::int64_t>>& graph) {
  std::vector<CameraRecord> cameras{{0, {500.0, 500.0, 320.0, 240.0, 640, 480}}};
  std::vector<Keyframe> keyframes;
  std::unordered_map<std::int64_t, Landmark> landmarks;
  for (std::size_t f = 0; f < graph.size(); ++f) {
    Keyframe kf;
    kf.id = static_cast<std::int64_t>(f);
    kf.camera_id = 0;
    kf.global_descriptor = Eigen::VectorXf::Zero(4);
    const Eigen::Index n = static_cast<Eigen::Index>(graph[f].size());
    kf.keypoints.resize(2, n);
    for (Eigen::Index k = 0; k < n; ++k) kf.keypoints.col(k) << static_cast<double>(k), 0.0;
    kf.local_descriptors = Eigen::MatrixXf::Zero(4, n);
    keyframes.push_back(std::move(kf));
    for (std::size_t k = 0; k < graph[f].size(); ++k) {
      Landmark& lm = landmarks[graph[f][k]];
      lm.id = graph[f][k];
      lm.position = Eigen::Vector3d(0, 0, 5);
      lm.observations.push_back({static_cast<std::int64_t>(f), static_cast<Eigen::Index>(k)});
    }
  }
  std::vector<Landmark> lm_list;
  for (auto& [id, lm] : landmarks) lm_list.push_back(std::move(lm));
  return VisualMap(std::move(cameras), 4, 4, std::move(keyframes), std::move(lm_list));
}

// Independent connected-components answer via BFS over the same subgraph.
std::vector<std::set<std::int64_t>> bfs_components(
    const std::vector<std::vector<std::int64_t>>& graph,
    const std::vector<std::int64_t>& priors) {
  std::unordered_map<std::int64_t, std::vector<std::size_t>> lm_to_frames;
  for (std::size_t i = 0; i < priors.size(); ++i)
    for (std::int64_t lm : graph[static_cast<std::size_t>(priors[i])])
      lm_to_frames[lm].push_back(i);

  std::vector<bool> seen(priors.size(), false);
  std::vector<std::set<std::int64_t>> components;
  for (std::size_t start = 0; start < priors.size(); ++start) {
    if (seen[start]) continue;
    std::set<std::int64_t> comp;
    std::queue<std::size_t> frontier;
    frontier.push(start);
    seen[start] = true;
    while (!frontier.empty()) {
      const std::size_t at = frontier.front();
      frontier.pop();
      comp.insert(priors[at]);
      for (std::int64_t lm : graph[static_cast<std::size_t>(priors[at])])
        for (std::size_t next : lm_to_frames[lm])
          if (!seen[next]) {
            seen[next] = true;
            frontier.push(next);
          }
    }
    components.push_back(std::move(comp));
  }
  return components;
}

}  // namespace

TEST_SUITE("covisibility") {

TEST_CASE("five priors split into a 3-frame and a 2-frame place, larger first") {
  // Frames 0-1-2 chained through landmarks 100/101; frames 3-4 share 200.
  const VisualMap map = bipartite_map({{100}, {100, 101}, {101}, {200}, {200, 201}});
  const std::vector<std::int64_t> priors{3, 1, 4, 0, 2};
  const auto places = cluster_priors(map, priors);
  REQUIRE(places.size() == 2);
  CHECK(places[0].keyframe_ids == std::vector<std::int64_t>{0, 1, 2});
  CHECK(places[0].landmark_ids == std::vector<std::int64_t>{100, 101});
  CHECK(places[0].rank == 0);
  CHECK(places[1].keyframe_ids == std::vector<std::int64_t>{3, 4});
  CHECK(places[1].landmark_ids == std::vector<std::int64_t>{200, 201});
  CHECK(places[1].rank == 1);
}

TEST_CASE("a single prior forms one place with its landmarks") {
  const VisualMap map = bipartite_map({{7, 9, 11}});
  const auto places = cluster_priors(map, std::vector<std::int64_t>{0});
  REQUIRE(places.size() == 1);
  CHECK(places[0].keyframe_ids == std::vector<std::int64_t>{0});
  CHECK(places[0].landmark_ids == std::vector<std::int64_t>{7, 9, 11});
}

TEST_CASE("sharing one landmark joins frames; isolation separates them") {
  const VisualMap map = bipartite_map({{9, 1}, {9, 2}, {3}});
  const auto places = cluster_priors(map, std::vector<std::int64_t>{0, 1, 2});
  REQUIRE(places.size() == 2);
  CHECK(places[0].keyframe_ids == std::vector<std::int64_t>{0, 1});
  CHECK(places[1].keyframe_ids == std::vector<std::int64_t>{2});
}

TEST_CASE("no transitive closure through unretrieved frames") {
  // A(0) and C(2) are only linked through B(1); with B not retrieved they
  // must stay separate places.
  const VisualMap map = bipartite_map({{1}, {1, 2}, {2}});
  const auto places = cluster_priors(map, std::vector<std::int64_t>{0, 2});
  REQUIRE(places.size() == 2);
  CHECK(places[0].keyframe_ids == std::vector<std::int64_t>{0});
  CHECK(places[1].keyframe_ids == std::vector<std::int64_t>{2});

  const auto joined = cluster_priors(map, std::vector<std::int64_t>{0, 1, 2});
  REQUIRE(joined.size() == 1);
  CHECK(joined[0].keyframe_ids == std::vector<std::int64_t>{0, 1, 2});
}

TEST_CASE("equal-sized places order by smallest keyframe id") {
  const VisualMap map = bipartite_map({{1}, {2}, {2}, {1}});
  const auto places = cluster_priors(map, std::vector<std::int64_t>{1, 2, 0, 3});
  REQUIRE(places.size() == 2);
  CHECK(places[0].keyframe_ids == std::vector<std::int64_t>{0, 3});
  CHECK(places[1].keyframe_ids == std::vector<std::int64_t>{1, 2});
}

TEST_CASE("output is independent of prior order and duplicates collapse") {
  const VisualMap map = bipartite_map({{1}, {1, 2}, {3}, {3, 4}, {5}});
  const std::vector<std::int64_t> base{0, 1, 2, 3, 4};
  const auto want = cluster_priors(map, base);
  Rng rng(61);
  std::vector<std::int64_t> shuffled = base;
  for (int trial = 0; trial < 10; ++trial) {
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[rng.uniform_index(i)]);
    std::vector<std::int64_t> with_dupes = shuffled;
    with_dupes.push_back(shuffled[0]);
    const auto got = cluster_priors(map, with_dupes);
    REQUIRE(got.size() == want.size());
    for (std::size_t p = 0; p < got.size(); ++p) {
      CHECK(got[p].keyframe_ids == want[p].keyframe_ids);
      CHECK(got[p].landmark_ids == want[p].landmark_ids);
    }
  }
}

TEST_CASE("random graphs match a BFS oracle and form a disjoint partition") {
  Rng rng(62);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n_frames = 2 + rng.uniform_index(49);
    const std::size_t n_landmarks = 1 + rng.uniform_index(500);
    std::vector<std::vector<std::int64_t>> graph(n_frames);
    for (auto& obs : graph) {
      const std::size_t count = 1 + rng.uniform_index(std::min<std::size_t>(8, n_landmarks));
      std::set<std::int64_t> chosen;
      while (chosen.size() < count)
        chosen.insert(static_cast<std::int64_t>(rng.uniform_index(n_landmarks)));
      obs.assign(chosen.begin(), chosen.end());
    }
    const VisualMap map = bipartite_map(graph);

    // Retrieve a random subset of frames.
    std::vector<std::int64_t> priors;
    for (std::size_t f = 0; f < n_frames; ++f)
      if (rng.uniform() < 0.7) priors.push_back(static_cast<std::int64_t>(f));
    if (priors.empty()) priors.push_back(0);

    const auto places = cluster_priors(map, priors);
    auto oracle = bfs_components(graph, priors);

    REQUIRE(places.size() == oracle.size());
    // Compare as partitions (order-free), then check the documented order.
    std::set<std::set<std::int64_t>> got_sets, want_sets(oracle.begin(), oracle.end());
    std::set<std::int64_t> all_frames, all_landmarks;
    std::size_t total_frames = 0, total_landmarks = 0;
    for (const Place& p : places) {
      got_sets.insert(std::set<std::int64_t>(p.keyframe_ids.begin(), p.keyframe_ids.end()));
      all_frames.insert(p.keyframe_ids.begin(), p.keyframe_ids.end());
      all_landmarks.insert(p.landmark_ids.begin(), p.landmark_ids.end());
      total_frames += p.keyframe_ids.size();
      total_landmarks += p.landmark_ids.size();
    }
    CHECK(got_sets == want_sets);
    // Partition: no frame or landmark in two places, union covers the input.
    CHECK(total_frames == all_frames.size());
    CHECK(total_landmarks == all_landmarks.size());
    CHECK(all_frames == std::set<std::int64_t>(priors.begin(), priors.end()));

    for (std::size_t p = 1; p < places.size(); ++p) {
      const bool bigger = places[p - 1].keyframe_ids.size() > places[p].keyframe_ids.size();
      const bool tie_ok = places[p - 1].keyframe_ids.size() == places[p].keyframe_ids.size() &&
                          places[p - 1].keyframe_ids.front() < places[p].keyframe_ids.front();
      CHECK((bigger || tie_ok));
    }
  }
}

TEST_CASE("invalid inputs are rejected") {
  const VisualMap map = bipartite_map({{1}});
  CHECK_THROWS_AS(cluster_priors(map, std::vector<std::int64_t>{}), ValidationError);
  CHECK_THROWS_AS(cluster_priors(map, std::vector<std::int64_t>{0, 5}), ValidationError);
}

}  // TEST_SUITE
