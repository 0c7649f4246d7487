#include "hloc/matching.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "hloc/errors.hpp"
#include "hloc/rng.hpp"

using namespace hloc;

namespace {

constexpr Eigen::Index kDim = 8;

// Map where landmark j's observations carry exactly the given descriptors.
// Observation o of landmark j lives in keyframe o at keypoint column j.
VisualMap descriptor_map(const std::vector<std::vector<Eigen::VectorXf>>& obs_descs,
                         Eigen::Index dim = kDim) {
  std::size_t max_obs = 1;
  for (const auto& d : obs_descs) max_obs = std::max(max_obs, d.size());
  const Eigen::Index n_cols = static_cast<Eigen::Index>(obs_descs.size());

  std::vector<CameraRecord> cameras{{0, {500.0, 500.0, 320.0, 240.0, 640, 480}}};
  std::vector<Keyframe> keyframes;
  for (std::size_t o = 0; o < max_obs; ++o) {
    Keyframe kf;
    kf.id = static_cast<std::int64_t>(o);
    kf.camera_id = 0;
    kf.global_descriptor = Eigen::VectorXf::Zero(4);
    kf.keypoints.resize(2, n_cols);
    for (Eigen::Index c = 0; c < n_cols; ++c)
      kf.keypoints.col(c) << static_cast<double>(c % 640), static_cast<double>(c / 640);
    kf.local_descriptors = Eigen::MatrixXf::Zero(dim, n_cols);
    for (Eigen::Index c = 0; c < n_cols; ++c)
      if (o < obs_descs[static_cast<std::size_t>(c)].size())
        kf.local_descriptors.col(c) = obs_descs[static_cast<std::size_t>(c)][o];
    keyframes.push_back(std::move(kf));
  }

  std::vector<Landmark> landmarks;
  for (std::size_t j = 0; j < obs_descs.size(); ++j) {
    Landmark lm;
    lm.id = static_cast<std::int64_t>(j);
    lm.position = Eigen::Vector3d(0, 0, 5);
    for (std::size_t o = 0; o < obs_descs[j].size(); ++o)
      lm.observations.push_back({static_cast<std::int64_t>(o), static_cast<Eigen::Index>(j)});
    landmarks.push_back(std::move(lm));
  }
  return VisualMap(std::move(cameras), 4, dim, std::move(keyframes), std::move(landmarks));
}

Place whole_map_place(const VisualMap& map) {
  Place place;
  for (const Keyframe& kf : map.keyframes()) place.keyframe_ids.push_back(kf.id);
  for (const Landmark& lm : map.landmarks()) place.landmark_ids.push_back(lm.id);
  return place;
}

QueryFrame make_query(const std::vector<Eigen::VectorXf>& descriptors, Eigen::Index dim = kDim) {
  QueryFrame q;
  q.camera = {500.0, 500.0, 320.0, 240.0, 640, 480};
  const Eigen::Index n = static_cast<Eigen::Index>(descriptors.size());
  q.keypoints.resize(2, n);
  q.local_descriptors.resize(dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    q.keypoints.col(i) << static_cast<double>(i % 640), static_cast<double>(i / 640);
    q.local_descriptors.col(i) = descriptors[static_cast<std::size_t>(i)];
  }
  q.global_descriptor = Eigen::VectorXf::Zero(4);
  return q;
}

Eigen::VectorXf vec(std::initializer_list<float> head) {
  Eigen::VectorXf v = Eigen::VectorXf::Zero(kDim);
  Eigen::Index i = 0;
  for (float x : head) v[i++] = x;
  return v;
}

Eigen::VectorXf unit_noise(Rng& rng, Eigen::Index dim, double sigma,
                           const Eigen::VectorXf* base = nullptr) {
  Eigen::VectorXf v(dim);
  for (Eigen::Index d = 0; d < dim; ++d) v[d] = static_cast<float>(rng.normal() * sigma);
  if (base) v += *base;
  return v.normalized();
}

// Independent reimplementation of the matching rules via exhaustive scan.
std::vector<Match2D3D> oracle_match(const VisualMap& map,
                                    const std::vector<std::int64_t>& landmark_ids,
                                    const QueryFrame& query, const MatchParams& params) {
  std::vector<std::int64_t> entry_landmark;
  std::vector<Eigen::VectorXf> entry_desc;
  for (std::int64_t id : landmark_ids)
    for (const Observation& obs : map.landmark(id).observations) {
      entry_landmark.push_back(id);
      entry_desc.push_back(map.observation_descriptor(obs));
    }

  const double ratio_sq = params.ratio_threshold * params.ratio_threshold;
  std::map<std::int64_t, std::pair<float, Eigen::Index>> best;
  for (Eigen::Index kp = 0; kp < query.num_keypoints(); ++kp) {
    const Eigen::VectorXf q = query.local_descriptors.col(kp);
    std::size_t argmin = 0;
    float d1 = std::numeric_limits<float>::infinity();
    for (std::size_t e = 0; e < entry_desc.size(); ++e) {
      const float d = (entry_desc[e] - q).squaredNorm();
      if (d < d1) {
        d1 = d;
        argmin = e;
      }
    }
    if (entry_desc.empty()) continue;
    const std::int64_t lm1 = entry_landmark[argmin];
    double d2 = std::numeric_limits<double>::infinity();
    bool has_second = false;
    for (std::size_t e = 0; e < entry_desc.size(); ++e) {
      if (entry_landmark[e] == lm1) continue;
      has_second = true;
      d2 = std::min(d2, static_cast<double>((entry_desc[e] - q).squaredNorm()));
    }
    if (static_cast<double>(d1) > params.max_descriptor_distance) continue;
    if (has_second && static_cast<double>(d1) > ratio_sq * d2) continue;
    auto [it, inserted] = best.try_emplace(lm1, d1, kp);
    if (!inserted && d1 < it->second.first) it->second = {d1, kp};
  }

  std::vector<Match2D3D> out;
  for (const auto& [lm, hit] : best) out.push_back({hit.second, lm, hit.first});
  std::sort(out.begin(), out.end(),
            [](const Match2D3D& a, const Match2D3D& b) {
              return a.keypoint_index < b.keypoint_index;
            });
  return out;
}

bool same_matches(const std::vector<Match2D3D>& a, const std::vector<Match2D3D>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].keypoint_index != b[i].keypoint_index || a[i].landmark_id != b[i].landmark_id ||
        a[i].descriptor_distance != b[i].descriptor_distance)
      return false;
  return true;
}

}  // namespace

TEST_SUITE("matching") {

TEST_CASE("an identical descriptor matches its landmark at distance zero") {
  const Eigen::VectorXf d = vec({1.0f, 2.0f, 3.0f});
  const VisualMap map = descriptor_map({{d}});
  const QueryFrame query = make_query({d});
  for (double ratio : {1.0, 0.8}) {
    MatchParams params;
    params.ratio_threshold = ratio;  // single landmark: ratio passes vacuously
    const auto matches = match_place(map, whole_map_place(map), query, params);
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].keypoint_index == 0);
    CHECK(matches[0].landmark_id == 0);
    CHECK(matches[0].descriptor_distance == 0.0f);
  }
}

TEST_CASE("two keypoints on one landmark keep only the closer") {
  const Eigen::VectorXf proto = vec({1.0f});
  const VisualMap map = descriptor_map({{proto}});
  // Keypoint 0 at squared distance 0.09, keypoint 1 at 0.01.
  const QueryFrame query = make_query({vec({1.3f}), vec({1.1f})});
  MatchParams params;
  params.ratio_threshold = 1.0;
  const auto matches = match_place(map, whole_map_place(map), query, params);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].keypoint_index == 1);
  CHECK(matches[0].descriptor_distance == doctest::Approx(0.01).epsilon(1e-5));
}

TEST_CASE("the ratio test's second neighbor must be another landmark") {
  // Landmark 0 has two equal observations at squared distance 0.5 from the
  // query; landmark 1 sits far away at 10. Against landmark 1 the ratio
  // passes easily; against landmark 0's own duplicate it would fail.
  const float a = std::sqrt(0.5f);
  const VisualMap map =
      descriptor_map({{vec({a}), vec({-a})}, {vec({0.0f, std::sqrt(10.0f)})}});
  const QueryFrame query = make_query({vec({0.0f})});
  MatchParams params;  // ratio 0.8
  const auto matches = match_place(map, whole_map_place(map), query, params);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].landmark_id == 0);
  CHECK(matches[0].descriptor_distance == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("ambiguous matches fail the ratio test") {
  // d1 = 0.5, d2 = 0.6: 0.5 > 0.64 * 0.6, so the match is dropped.
  const VisualMap map = descriptor_map(
      {{vec({std::sqrt(0.5f)})}, {vec({0.0f, std::sqrt(0.6f)})}});
  const QueryFrame query = make_query({vec({0.0f})});
  MatchParams params;
  CHECK(match_place(map, whole_map_place(map), query, params).empty());
  params.ratio_threshold = 1.0;
  CHECK(match_place(map, whole_map_place(map), query, params).size() == 1);
}

TEST_CASE("the absolute distance gate applies to squared distances") {
  const VisualMap map = descriptor_map({{vec({std::sqrt(0.5f)})}});
  const QueryFrame query = make_query({vec({0.0f})});
  MatchParams params;
  params.ratio_threshold = 1.0;
  params.max_descriptor_distance = 0.4;
  CHECK(match_place(map, whole_map_place(map), query, params).empty());
  params.max_descriptor_distance = 0.6;
  CHECK(match_place(map, whole_map_place(map), query, params).size() == 1);
}

TEST_CASE("noisy synthetic place equals the exhaustive oracle exactly") {
  Rng rng(71);
  const Eigen::Index n_landmarks = 200;
  std::vector<Eigen::VectorXf> prototypes;
  std::vector<std::vector<Eigen::VectorXf>> obs;
  for (Eigen::Index j = 0; j < n_landmarks; ++j) {
    prototypes.push_back(unit_noise(rng, kDim, 1.0));
    std::vector<Eigen::VectorXf> o;
    const std::size_t count = 1 + rng.uniform_index(3);
    for (std::size_t c = 0; c < count; ++c)
      o.push_back(unit_noise(rng, kDim, 0.05, &prototypes.back()));
    obs.push_back(std::move(o));
  }
  const VisualMap map = descriptor_map(obs);

  std::vector<Eigen::VectorXf> query_descs;
  for (Eigen::Index j = 0; j < n_landmarks; ++j)
    query_descs.push_back(unit_noise(rng, kDim, 0.05, &prototypes[static_cast<std::size_t>(j)]));
  for (int d = 0; d < 20; ++d) query_descs.push_back(unit_noise(rng, kDim, 1.0));
  const QueryFrame query = make_query(query_descs);

  const Place place = whole_map_place(map);
  MatchParams params;
  params.epsilon = 0.0;
  const auto got = match_place(map, place, query, params);
  const auto want = oracle_match(map, place.landmark_ids, query, params);
  CHECK(!got.empty());
  CHECK(same_matches(got, want));

  // Output invariants: unique keypoints, unique landmarks, sorted.
  std::set<Eigen::Index> kps;
  std::set<std::int64_t> lms;
  for (const auto& m : got) {
    kps.insert(m.keypoint_index);
    lms.insert(m.landmark_id);
  }
  CHECK(kps.size() == got.size());
  CHECK(lms.size() == got.size());
  CHECK(std::is_sorted(got.begin(), got.end(), [](const auto& a, const auto& b) {
    return a.keypoint_index < b.keypoint_index;
  }));
}

TEST_CASE("oracle parity holds on restricted places too") {
  Rng rng(72);
  std::vector<std::vector<Eigen::VectorXf>> obs;
  for (int j = 0; j < 60; ++j) obs.push_back({unit_noise(rng, kDim, 1.0)});
  const VisualMap map = descriptor_map(obs);

  std::vector<Eigen::VectorXf> query_descs;
  for (int j = 0; j < 60; ++j) {
    Eigen::VectorXf base = map.observation_descriptor({0, j});
    query_descs.push_back(unit_noise(rng, kDim, 0.1, &base));
  }
  const QueryFrame query = make_query(query_descs);

  Place place;
  place.keyframe_ids = {0};
  for (std::int64_t id = 0; id < 60; id += 3) place.landmark_ids.push_back(id);
  MatchParams params;
  params.epsilon = 0.0;
  CHECK(same_matches(match_place(map, place, query, params),
                     oracle_match(map, place.landmark_ids, query, params)));
}

TEST_CASE("match_all equals match_place over the whole map") {
  Rng rng(73);
  std::vector<std::vector<Eigen::VectorXf>> obs;
  for (int j = 0; j < 40; ++j) obs.push_back({unit_noise(rng, kDim, 1.0)});
  const VisualMap map = descriptor_map(obs);
  std::vector<Eigen::VectorXf> query_descs;
  for (int j = 0; j < 30; ++j) query_descs.push_back(unit_noise(rng, kDim, 1.0));
  const QueryFrame query = make_query(query_descs);
  MatchParams params;
  CHECK(same_matches(match_all(map, query, params),
                     match_place(map, whole_map_place(map), query, params)));
}

TEST_CASE("restricting the search set never shrinks a kept match's distance") {
  Rng rng(74);
  std::vector<std::vector<Eigen::VectorXf>> obs;
  for (int j = 0; j < 80; ++j) obs.push_back({unit_noise(rng, kDim, 1.0)});
  const VisualMap map = descriptor_map(obs);
  std::vector<Eigen::VectorXf> query_descs;
  for (int j = 0; j < 50; ++j) query_descs.push_back(unit_noise(rng, kDim, 0.6));
  const QueryFrame query = make_query(query_descs);

  MatchParams params;
  params.epsilon = 0.0;
  params.ratio_threshold = 1.0;
  const auto full = match_all(map, query, params);

  Place half;
  half.keyframe_ids = {0};
  for (std::int64_t id = 0; id < 80; id += 2) half.landmark_ids.push_back(id);
  const auto restricted = match_place(map, half, query, params);

  std::map<Eigen::Index, float> full_by_kp;
  for (const auto& m : full) full_by_kp[m.keypoint_index] = m.descriptor_distance;
  for (const auto& m : restricted) {
    const auto it = full_by_kp.find(m.keypoint_index);
    if (it != full_by_kp.end()) CHECK(m.descriptor_distance >= it->second);
  }
}

TEST_CASE("degenerate inputs") {
  Rng rng(75);
  const VisualMap map = descriptor_map({{vec({1.0f})}});
  const QueryFrame query = make_query({vec({1.0f})});
  MatchParams params;

  SUBCASE("empty place is rejected") {
    CHECK_THROWS_AS(match_place(map, Place{}, query, params), ValidationError);
  }
  SUBCASE("place with no landmarks matches nothing") {
    Place place;
    place.keyframe_ids = {0};
    CHECK(match_place(map, place, query, params).empty());
  }
  SUBCASE("query with no keypoints matches nothing") {
    CHECK(match_place(map, whole_map_place(map), make_query({}), params).empty());
  }
  SUBCASE("descriptor dimension mismatch") {
    QueryFrame bad = make_query({Eigen::VectorXf::Zero(kDim + 1)}, kDim + 1);
    CHECK_THROWS_AS(match_place(map, whole_map_place(map), bad, params), ValidationError);
  }
  SUBCASE("invalid parameters") {
    MatchParams bad;
    bad.epsilon = -1.0;
    CHECK_THROWS_AS(match_place(map, whole_map_place(map), query, bad), ValidationError);
    bad = MatchParams{};
    bad.ratio_threshold = 0.0;
    CHECK_THROWS_AS(match_place(map, whole_map_place(map), query, bad), ValidationError);
    bad.ratio_threshold = 1.5;
    CHECK_THROWS_AS(match_place(map, whole_map_place(map), query, bad), ValidationError);
  }
}

}  // TEST_SUITE
