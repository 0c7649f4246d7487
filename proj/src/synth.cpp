#include "hloc/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>

#include "hloc/block_io.hpp"
#include "hloc/errors.hpp"
#include "hloc/rng.hpp"

namespace hloc {

namespace {

using nlohmann::json;

// One shared camera for the whole synthetic world.
const PinholeCamera kSynthCamera{500.0, 500.0, 320.0, 240.0, 640, 480};
constexpr std::int64_t kSynthCameraId = 0;

// Landmark field around the trajectory: lateral and depth extent (meters),
// plus how far beyond the first/last keyframe landmarks may spill.
constexpr double kFieldY = 2.0;
constexpr double kFieldZNear = 4.0;
constexpr double kFieldZFar = 8.0;
constexpr double kFieldXMargin = 1.0;

// Gap between consecutive places, comfortably beyond the 5 m retrieval
// ground-truth radius so places never vouch for each other.
constexpr double kPlaceGap = 30.0;

// Keyframe orientation jitter (radians) and the amplitude of the
// pose-dependent component of global descriptors, which makes descriptors
// drift smoothly along the trajectory so same-place frames are mutual near
// neighbors.
constexpr double kOrientationJitter = 0.03;
constexpr double kGlobalArcAmplitude = 0.15;

void validate(const SynthConfig& c) {
  const auto positive = [](const char* name, auto v) {
    if (v < 1)
      throw ValidationError(std::string("synth: ") + name + " must be >= 1");
  };
  positive("num_places", c.num_places);
  positive("keyframes_per_place", c.keyframes_per_place);
  positive("landmarks_per_place", c.landmarks_per_place);
  positive("queries_per_place", c.queries_per_place);
  positive("observations_per_landmark", c.observations_per_landmark);
  positive("query_keypoints", c.query_keypoints);
  positive("global_descriptor_dim", c.global_descriptor_dim);
  positive("local_descriptor_dim", c.local_descriptor_dim);
  if (c.trajectory_spacing_m <= 0.0)
    throw ValidationError("synth: trajectory_spacing_m must be positive");
  if (c.keypoint_noise_px < 0.0 || c.local_descriptor_noise_sigma < 0.0 ||
      c.global_descriptor_noise_sigma < 0.0)
    throw ValidationError("synth: noise levels must be >= 0");
  if (c.distractor_keypoints_per_query < 0)
    throw ValidationError("synth: distractor_keypoints_per_query must be >= 0");
  if (c.query_offset_position_m < 0.0 || c.query_offset_angle_deg < 0.0)
    throw ValidationError("synth: query offsets must be >= 0");
  for (const auto& [a, b] : c.aliasing_pairs) {
    if (a < 0 || b < 0 || a >= c.num_places || b >= c.num_places)
      throw ValidationError("synth: aliasing pair references a place out of range");
    if (a == b) throw ValidationError("synth: aliasing pair must name two distinct places");
  }
  if (c.shared_vocabulary_size != 0 && c.shared_vocabulary_size < c.landmarks_per_place)
    throw ValidationError(
        "synth: shared_vocabulary_size must be 0 or >= landmarks_per_place");
}

Eigen::VectorXf unit_vector(Rng& rng, Eigen::Index dim) {
  Eigen::VectorXf v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = static_cast<float>(rng.normal());
  const float n = v.norm();
  return n > 0.0f ? Eigen::VectorXf(v / n) : Eigen::VectorXf::Unit(dim, 0);
}

Eigen::VectorXf noisy_unit(const Eigen::VectorXf& prototype, double sigma, Rng& rng) {
  if (sigma == 0.0) return prototype;
  Eigen::VectorXf v = prototype;
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += static_cast<float>(sigma * rng.normal());
  const float n = v.norm();
  return n > 0.0f ? Eigen::VectorXf(v / n) : prototype;
}

// Global descriptor at a trajectory parameter arc in [-1, 1].
Eigen::VectorXf global_descriptor(const Eigen::VectorXf& place_proto,
                                  const Eigen::VectorXf& arc_dir, double arc, double sigma,
                                  Rng& rng) {
  Eigen::VectorXf g =
      place_proto + static_cast<float>(kGlobalArcAmplitude * arc) * arc_dir;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (sigma > 0.0) g[i] += static_cast<float>(sigma * rng.normal());
  return g.normalized();
}

// Pixel = exact projection plus in-bounds Gaussian noise. The exact
// projection is already inside the image, so a short retry loop terminates
// in practice; the clamp is a safety net for extreme noise levels.
Eigen::Vector2d noisy_pixel(const Eigen::Vector2d& exact, double sigma, Rng& rng,
                            const PinholeCamera& cam) {
  if (sigma == 0.0) return exact;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const Eigen::Vector2d px =
        exact + sigma * Eigen::Vector2d(rng.normal(), rng.normal());
    if (cam.contains(px)) return px;
  }
  return {std::clamp(exact.x(), 0.0, static_cast<double>(cam.width - 1)),
          std::clamp(exact.y(), 0.0, static_cast<double>(cam.height - 1))};
}

template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i)
    std::swap(values[i - 1], values[rng.uniform_index(i)]);
}

struct PlacePrototypes {
  Eigen::VectorXf global;
  Eigen::VectorXf arc_dir;
  std::vector<Eigen::VectorXf> landmarks;
};

}  // namespace

SynthWorld generate_world(const SynthConfig& config) {
  validate(config);
  const Rng root(config.rng_seed);
  const int frames = config.keyframes_per_place;
  const double span = (frames - 1) * config.trajectory_spacing_m;

  // Descriptor prototypes first, then aliasing overrides; geometry draws
  // from separate streams, so these stay put if the layout changes.
  std::vector<Eigen::VectorXf> vocabulary;
  if (config.shared_vocabulary_size > 0) {
    Rng rng = root.fork("vocabulary");
    vocabulary.reserve(static_cast<std::size_t>(config.shared_vocabulary_size));
    for (int w = 0; w < config.shared_vocabulary_size; ++w)
      vocabulary.push_back(unit_vector(rng, config.local_descriptor_dim));
  }
  std::vector<PlacePrototypes> prototypes(static_cast<std::size_t>(config.num_places));
  for (int p = 0; p < config.num_places; ++p) {
    PlacePrototypes& proto = prototypes[static_cast<std::size_t>(p)];
    Rng global_rng = root.fork("place-proto", static_cast<std::uint64_t>(p));
    proto.global = unit_vector(global_rng, config.global_descriptor_dim);
    proto.arc_dir = unit_vector(global_rng, config.global_descriptor_dim);
    Rng local_rng = root.fork("landmark-protos", static_cast<std::uint64_t>(p));
    proto.landmarks.reserve(static_cast<std::size_t>(config.landmarks_per_place));
    if (vocabulary.empty()) {
      for (int j = 0; j < config.landmarks_per_place; ++j)
        proto.landmarks.push_back(unit_vector(local_rng, config.local_descriptor_dim));
    } else {
      // Without replacement within the place, so ambiguity only arises
      // across places.
      std::vector<std::size_t> words(vocabulary.size());
      std::iota(words.begin(), words.end(), std::size_t{0});
      shuffle(words, local_rng);
      for (int j = 0; j < config.landmarks_per_place; ++j)
        proto.landmarks.push_back(vocabulary[words[static_cast<std::size_t>(j)]]);
    }
  }
  for (const auto& [a, b] : config.aliasing_pairs)
    prototypes[static_cast<std::size_t>(b)] = prototypes[static_cast<std::size_t>(a)];

  std::vector<Keyframe> keyframes;
  std::vector<Landmark> landmarks;
  std::vector<QueryFrame> queries;

  for (int p = 0; p < config.num_places; ++p) {
    const PlacePrototypes& proto = prototypes[static_cast<std::size_t>(p)];
    const double x0 = p * (span + kPlaceGap);
    const std::int64_t kf_base = static_cast<std::int64_t>(p) * frames;
    const std::int64_t lm_base = static_cast<std::int64_t>(p) * config.landmarks_per_place;

    // Keyframe poses and global descriptors.
    Rng kf_rng = root.fork("keyframes", static_cast<std::uint64_t>(p));
    std::vector<Keyframe> place_frames(static_cast<std::size_t>(frames));
    for (int i = 0; i < frames; ++i) {
      Keyframe& kf = place_frames[static_cast<std::size_t>(i)];
      kf.id = kf_base + i;
      kf.camera_id = kSynthCameraId;
      const Eigen::Vector3d center(x0 + i * config.trajectory_spacing_m, 0.0, 0.0);
      const Eigen::Vector3d jitter(kf_rng.normal(), kf_rng.normal(), kf_rng.normal());
      kf.pose.rotation = quaternion_exp(kOrientationJitter * jitter);
      kf.pose.translation = -(kf.pose.rotation * center);
      const double arc = frames > 1 ? 2.0 * i / (frames - 1) - 1.0 : 0.0;
      kf.global_descriptor = global_descriptor(proto.global, proto.arc_dir, arc,
                                               config.global_descriptor_noise_sigma, kf_rng);
    }

    // Landmarks: positions resampled until visible from at least one frame,
    // then a random subset of the observers is kept.
    Rng lm_rng = root.fork("landmarks", static_cast<std::uint64_t>(p));
    Rng obs_rng = root.fork("observations", static_cast<std::uint64_t>(p));
    std::vector<std::vector<std::pair<std::int64_t, Eigen::Vector2d>>> frame_points(
        static_cast<std::size_t>(frames));
    for (int j = 0; j < config.landmarks_per_place; ++j) {
      Landmark lm;
      lm.id = lm_base + j;
      std::vector<int> visible;
      std::vector<Eigen::Vector2d> pixels;
      while (visible.empty()) {
        lm.position = Eigen::Vector3d(
            lm_rng.uniform(x0 - kFieldXMargin, x0 + span + kFieldXMargin),
            lm_rng.uniform(-kFieldY, kFieldY), lm_rng.uniform(kFieldZNear, kFieldZFar));
        for (int i = 0; i < frames; ++i) {
          const auto px =
              project(kSynthCamera, place_frames[static_cast<std::size_t>(i)].pose, lm.position);
          if (px && kSynthCamera.contains(*px)) {
            visible.push_back(i);
            pixels.push_back(*px);
          }
        }
      }
      std::vector<std::size_t> order(visible.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      shuffle(order, obs_rng);
      order.resize(std::min<std::size_t>(
          order.size(), static_cast<std::size_t>(config.observations_per_landmark)));
      std::sort(order.begin(), order.end());
      for (std::size_t o : order) {
        const Eigen::Vector2d px =
            noisy_pixel(pixels[o], config.keypoint_noise_px, obs_rng, kSynthCamera);
        frame_points[static_cast<std::size_t>(visible[o])].emplace_back(lm.id, px);
      }
      landmarks.push_back(std::move(lm));
    }

    // Materialize keyframe keypoint arrays and observation descriptors.
    for (int i = 0; i < frames; ++i) {
      Keyframe& kf = place_frames[static_cast<std::size_t>(i)];
      const auto& points = frame_points[static_cast<std::size_t>(i)];
      const Eigen::Index n = static_cast<Eigen::Index>(points.size());
      kf.keypoints.resize(2, n);
      kf.local_descriptors.resize(config.local_descriptor_dim, n);
      for (Eigen::Index k = 0; k < n; ++k) {
        const auto& [lm_id, px] = points[static_cast<std::size_t>(k)];
        kf.keypoints.col(k) = px;
        kf.local_descriptors.col(k) =
            noisy_unit(proto.landmarks[static_cast<std::size_t>(lm_id - lm_base)],
                       config.local_descriptor_noise_sigma, obs_rng);
        landmarks[static_cast<std::size_t>(lm_id)].observations.push_back({kf.id, k});
      }
      keyframes.push_back(std::move(kf));
    }

    // Queries: perturbed keyframe poses with regenerated observations.
    Rng query_rng = root.fork("queries", static_cast<std::uint64_t>(p));
    for (int q = 0; q < config.queries_per_place; ++q) {
      const Keyframe& base =
          keyframes[static_cast<std::size_t>(kf_base) + static_cast<std::size_t>(q % frames)];
      QueryFrame query;
      query.id = static_cast<std::int64_t>(queries.size());
      query.camera_id = kSynthCameraId;
      query.camera = kSynthCamera;
      query.true_place = p;

      const Eigen::Vector3d center_offset(
          query_rng.uniform(-config.query_offset_position_m, config.query_offset_position_m),
          query_rng.uniform(-config.query_offset_position_m, config.query_offset_position_m),
          query_rng.uniform(-config.query_offset_position_m, config.query_offset_position_m));
      const Eigen::Vector3d axis(query_rng.normal(), query_rng.normal(), query_rng.normal());
      const double angle =
          query_rng.uniform(-config.query_offset_angle_deg, config.query_offset_angle_deg) *
          std::numbers::pi / 180.0;
      Pose pose;
      pose.rotation =
          quaternion_exp(axis.norm() > 0.0 ? Eigen::Vector3d(angle * axis.normalized())
                                           : Eigen::Vector3d::Zero()) *
          base.pose.rotation;
      const Eigen::Vector3d center = base.pose.center() + center_offset;
      pose.translation = -(pose.rotation * center);
      query.gt_pose = pose;

      std::vector<std::pair<std::int64_t, Eigen::Vector2d>> visible;
      for (int j = 0; j < config.landmarks_per_place; ++j) {
        const Landmark& lm = landmarks[static_cast<std::size_t>(lm_base) +
                                       static_cast<std::size_t>(j)];
        const auto px = project(kSynthCamera, pose, lm.position);
        if (px && kSynthCamera.contains(*px)) visible.emplace_back(lm.id, *px);
      }
      shuffle(visible, query_rng);
      visible.resize(std::min<std::size_t>(visible.size(),
                                           static_cast<std::size_t>(config.query_keypoints)));

      const Eigen::Index n =
          static_cast<Eigen::Index>(visible.size()) + config.distractor_keypoints_per_query;
      query.keypoints.resize(2, n);
      query.local_descriptors.resize(config.local_descriptor_dim, n);
      Eigen::Index k = 0;
      for (const auto& [lm_id, px] : visible) {
        query.keypoints.col(k) = noisy_pixel(px, config.keypoint_noise_px, query_rng,
                                             kSynthCamera);
        query.local_descriptors.col(k) =
            noisy_unit(proto.landmarks[static_cast<std::size_t>(lm_id - lm_base)],
                       config.local_descriptor_noise_sigma, query_rng);
        ++k;
      }
      for (int d = 0; d < config.distractor_keypoints_per_query; ++d, ++k) {
        query.keypoints.col(k) << query_rng.uniform(0.0, kSynthCamera.width - 1.0),
            query_rng.uniform(0.0, kSynthCamera.height - 1.0);
        query.local_descriptors.col(k) = unit_vector(query_rng, config.local_descriptor_dim);
      }

      const double qx = center.x() - x0;
      const double arc =
          span > 0.0 ? std::clamp(2.0 * qx / span - 1.0, -1.0, 1.0) : 0.0;
      query.global_descriptor = global_descriptor(
          proto.global, proto.arc_dir, arc, config.global_descriptor_noise_sigma, query_rng);

      queries.push_back(std::move(query));
    }
  }

  VisualMap map({{kSynthCameraId, kSynthCamera}}, config.global_descriptor_dim,
                config.local_descriptor_dim, std::move(keyframes), std::move(landmarks));
  return {std::move(map), std::move(queries)};
}

namespace {

json query_to_json(const QueryFrame& q, MapFormat format) {
  if (!q.gt_pose)
    throw ValidationError("queries: query " + std::to_string(q.id) +
                          " has no ground-truth pose");
  json j;
  j["id"] = q.id;
  j["camera_id"] = q.camera_id;
  const Eigen::Quaterniond& rot = q.gt_pose->rotation;
  j["q_wxyz"] = json::array({rot.w(), rot.x(), rot.y(), rot.z()});
  j["t_xyz"] = json::array({q.gt_pose->translation.x(), q.gt_pose->translation.y(),
                            q.gt_pose->translation.z()});
  j["true_place"] = q.true_place;
  json keypoints = json::array();
  for (Eigen::Index k = 0; k < q.num_keypoints(); ++k)
    keypoints.push_back(json::array({q.keypoints(0, k), q.keypoints(1, k)}));
  j["keypoints"] = std::move(keypoints);
  if (format == MapFormat::kText) {
    json global = json::array();
    for (Eigen::Index d = 0; d < q.global_descriptor.size(); ++d)
      global.push_back(static_cast<double>(q.global_descriptor[d]));
    j["global_descriptor"] = std::move(global);
    json locals = json::array();
    for (Eigen::Index k = 0; k < q.local_descriptors.cols(); ++k) {
      json row = json::array();
      for (Eigen::Index d = 0; d < q.local_descriptors.rows(); ++d)
        row.push_back(static_cast<double>(q.local_descriptors(d, k)));
      locals.push_back(std::move(row));
    }
    j["local_descriptors"] = std::move(locals);
  }
  return j;
}

std::filesystem::path query_sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path sidecar = path;
  sidecar.replace_extension(".bin");
  if (sidecar == path) sidecar += ".bin";
  return sidecar;
}

}  // namespace

void save_queries(const std::vector<QueryFrame>& queries, const std::filesystem::path& path,
                  MapFormat format) {
  Eigen::Index global_dim = 0;
  Eigen::Index local_dim = 0;
  for (const QueryFrame& q : queries) {
    if (global_dim == 0) global_dim = q.global_descriptor.size();
    if (local_dim == 0 && q.num_keypoints() > 0) local_dim = q.local_descriptors.rows();
    if (q.global_descriptor.size() != global_dim)
      throw ValidationError("queries: inconsistent global descriptor dimensions");
    if (q.num_keypoints() > 0 && q.local_descriptors.rows() != local_dim)
      throw ValidationError("queries: inconsistent local descriptor dimensions");
  }

  json doc;
  doc["version"] = VisualMap::kFormatVersion;
  doc["global_descriptor_dim"] = global_dim;
  doc["local_descriptor_dim"] = local_dim;
  json list = json::array();
  for (const QueryFrame& q : queries) list.push_back(query_to_json(q, format));
  doc["queries"] = std::move(list);

  const std::filesystem::path sidecar = query_sidecar_path(path);
  if (format == MapFormat::kBinary) doc["descriptor_data"] = sidecar.filename().string();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed to write " + path.string());

  if (format == MapFormat::kBinary) {
    std::ofstream bin(sidecar, std::ios::binary);
    if (!bin) throw IoError("cannot open " + sidecar.string() + " for writing");
    Eigen::MatrixXf globals(global_dim, static_cast<Eigen::Index>(queries.size()));
    for (Eigen::Index i = 0; i < globals.cols(); ++i)
      globals.col(i) = queries[static_cast<std::size_t>(i)].global_descriptor;
    write_block(bin, globals);
    for (const QueryFrame& q : queries) write_block(bin, Eigen::MatrixXf(q.local_descriptors));
    if (!bin) throw IoError("failed to write " + sidecar.string());
  }
}

std::vector<QueryFrame> load_queries(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("queries: invalid JSON in " + path.string() + ": " + e.what());
  }

  try {
    const int version = doc.at("version").get<int>();
    if (version != VisualMap::kFormatVersion)
      throw ValidationError("queries: unsupported format version " + std::to_string(version));
    const auto global_dim = doc.at("global_descriptor_dim").get<Eigen::Index>();
    const auto local_dim = doc.at("local_descriptor_dim").get<Eigen::Index>();
    const json& list = doc.at("queries");
    if (!list.is_array()) throw ValidationError("queries: 'queries' must be an array");

    std::ifstream bin;
    Eigen::MatrixXf globals;
    const bool sidecar_mode = doc.contains("descriptor_data");
    if (sidecar_mode) {
      const std::filesystem::path sidecar =
          path.parent_path() / doc["descriptor_data"].get<std::string>();
      bin.open(sidecar, std::ios::binary);
      if (!bin) throw IoError("cannot open descriptor sidecar " + sidecar.string());
      globals = read_block_f32(bin, "query global descriptor block");
      if (globals.cols() != static_cast<Eigen::Index>(list.size()) ||
          (globals.cols() > 0 && globals.rows() != global_dim))
        throw ValidationError("queries: global descriptor block shape mismatch");
    }

    std::vector<QueryFrame> queries;
    queries.reserve(list.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
      const json& j = list[i];
      const std::string who = "query " + std::to_string(i);
      QueryFrame q;
      q.id = j.at("id").get<std::int64_t>();
      q.camera_id = j.at("camera_id").get<std::int64_t>();
      const json& rot = j.at("q_wxyz");
      const json& t = j.at("t_xyz");
      if (!rot.is_array() || rot.size() != 4 || !t.is_array() || t.size() != 3)
        throw ValidationError("queries: " + who + ": malformed ground-truth pose");
      Pose pose;
      pose.rotation = Eigen::Quaterniond(rot[0].get<double>(), rot[1].get<double>(),
                                         rot[2].get<double>(), rot[3].get<double>());
      pose.translation = Eigen::Vector3d(t[0].get<double>(), t[1].get<double>(),
                                         t[2].get<double>());
      if (std::abs(pose.rotation.norm() - 1.0) > 1e-3)
        throw ValidationError("queries: " + who + ": quaternion norm deviates from 1");
      if (std::abs(pose.rotation.norm() - 1.0) > 1e-9) pose.rotation.normalize();
      q.gt_pose = pose;
      q.true_place = j.at("true_place").get<std::int64_t>();

      const json& kps = j.at("keypoints");
      if (!kps.is_array()) throw ValidationError("queries: " + who + ": malformed keypoints");
      q.keypoints.resize(2, static_cast<Eigen::Index>(kps.size()));
      for (std::size_t k = 0; k < kps.size(); ++k) {
        if (!kps[k].is_array() || kps[k].size() != 2)
          throw ValidationError("queries: " + who + ": malformed keypoint");
        q.keypoints.col(static_cast<Eigen::Index>(k)) << kps[k][0].get<double>(),
            kps[k][1].get<double>();
      }

      if (sidecar_mode) {
        q.global_descriptor = globals.col(static_cast<Eigen::Index>(i));
        q.local_descriptors = read_block_f32(bin, who + " local descriptor block");
      } else {
        const json& global = j.at("global_descriptor");
        q.global_descriptor.resize(static_cast<Eigen::Index>(global.size()));
        for (std::size_t d = 0; d < global.size(); ++d)
          q.global_descriptor[static_cast<Eigen::Index>(d)] =
              static_cast<float>(global[d].get<double>());
        const json& locals = j.at("local_descriptors");
        q.local_descriptors.resize(local_dim, static_cast<Eigen::Index>(locals.size()));
        for (std::size_t k = 0; k < locals.size(); ++k) {
          if (!locals[k].is_array() ||
              static_cast<Eigen::Index>(locals[k].size()) != local_dim)
            throw ValidationError("queries: " + who + ": malformed local descriptor");
          for (Eigen::Index d = 0; d < local_dim; ++d)
            q.local_descriptors(d, static_cast<Eigen::Index>(k)) =
                static_cast<float>(locals[k][static_cast<std::size_t>(d)].get<double>());
        }
      }
      if (q.global_descriptor.size() != global_dim)
        throw ValidationError("queries: " + who + ": global descriptor dimension mismatch");
      if (q.local_descriptors.cols() != q.num_keypoints())
        throw ValidationError("queries: " + who +
                              ": keypoint and local descriptor counts differ");
      if (q.num_keypoints() > 0 && q.local_descriptors.rows() != local_dim)
        throw ValidationError("queries: " + who + ": local descriptor dimension mismatch");
      queries.push_back(std::move(q));
    }
    return queries;
  } catch (const json::exception& e) {
    throw ValidationError("queries: malformed document in " + path.string() + ": " + e.what());
  }
}

void bind_cameras(std::vector<QueryFrame>& queries, const VisualMap& map) {
  for (QueryFrame& q : queries) q.camera = map.camera(q.camera_id);
}

}  // namespace hloc
