#include "hloc/map_model.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "hloc/block_io.hpp"
#include "hloc/errors.hpp"

namespace hloc {

namespace {

using nlohmann::json;

std::string entity(const char* kind, std::int64_t id) {
  return std::string(kind) + " " + std::to_string(id);
}

const json& require_field(const json& j, const char* key, const std::string& context) {
  auto it = j.find(key);
  if (it == j.end())
    throw ValidationError(context + ": missing field '" + key + "'");
  return *it;
}

Eigen::Vector3d parse_vec3(const json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3)
    throw ValidationError(context + ": expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Pose parse_pose(const json& q, const json& t, const std::string& context) {
  if (!q.is_array() || q.size() != 4)
    throw ValidationError(context + ": q_wxyz must have 4 elements");
  Pose pose;
  pose.rotation = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(),
                                     q[2].get<double>(), q[3].get<double>());
  pose.translation = parse_vec3(t, context);
  return pose;
}

json pose_to_json_q(const Pose& p) {
  return json::array({p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()});
}

json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

VisualMap::VisualMap(std::vector<CameraRecord> cameras, Eigen::Index global_descriptor_dim,
                     Eigen::Index local_descriptor_dim, std::vector<Keyframe> keyframes,
                     std::vector<Landmark> landmarks)
    : cameras_(std::move(cameras)),
      global_dim_(global_descriptor_dim),
      local_dim_(local_descriptor_dim),
      keyframes_(std::move(keyframes)),
      landmarks_(std::move(landmarks)) {
  if (global_dim_ < 1 || local_dim_ < 1)
    throw ValidationError("descriptor dimensions must be positive");

  for (std::size_t i = 0; i < cameras_.size(); ++i) {
    const CameraRecord& cam = cameras_[i];
    const PinholeCamera& m = cam.model;
    if (!camera_slots_.emplace(cam.id, i).second)
      throw ValidationError(entity("camera", cam.id) + ": duplicate id");
    if (m.fx <= 0.0 || m.fy <= 0.0)
      throw ValidationError(entity("camera", cam.id) + ": focal lengths must be positive");
    if (m.width <= 0 || m.height <= 0)
      throw ValidationError(entity("camera", cam.id) + ": image size must be positive");
    if (m.cx < 0.0 || m.cx > m.width || m.cy < 0.0 || m.cy > m.height)
      throw ValidationError(entity("camera", cam.id) + ": principal point outside image");
  }

  std::sort(keyframes_.begin(), keyframes_.end(),
            [](const Keyframe& a, const Keyframe& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < keyframes_.size(); ++i) {
    Keyframe& kf = keyframes_[i];
    const std::string who = entity("keyframe", kf.id);
    if (!keyframe_slots_.emplace(kf.id, i).second)
      throw ValidationError(who + ": duplicate id");
    auto cam_it = camera_slots_.find(kf.camera_id);
    if (cam_it == camera_slots_.end())
      throw ValidationError(who + ": references missing camera " + std::to_string(kf.camera_id));

    const double qnorm = kf.pose.rotation.norm();
    if (std::abs(qnorm - 1.0) > 1e-3)
      throw ValidationError(who + ": quaternion norm deviates from 1 by more than 1e-3");
    // Renormalize only when needed so that reloading a saved map keeps the
    // stored bits (load-save-load fixpoint).
    if (std::abs(qnorm - 1.0) > 1e-9) kf.pose.rotation.normalize();

    if (kf.global_descriptor.size() != global_dim_)
      throw ValidationError(who + ": global descriptor dimension mismatch");
    if (kf.keypoints.cols() != kf.local_descriptors.cols())
      throw ValidationError(who + ": keypoint and local descriptor counts differ");
    if (kf.keypoints.cols() > 0 && kf.local_descriptors.rows() != local_dim_)
      throw ValidationError(who + ": local descriptor dimension mismatch");

    const PinholeCamera& cam = cameras_[cam_it->second].model;
    for (Eigen::Index k = 0; k < kf.keypoints.cols(); ++k) {
      if (!cam.contains(kf.keypoints.col(k)))
        throw ValidationError(who + ": keypoint " + std::to_string(k) +
                              " outside image bounds");
    }
  }

  std::sort(landmarks_.begin(), landmarks_.end(),
            [](const Landmark& a, const Landmark& b) { return a.id < b.id; });
  reverse_index_.resize(keyframes_.size());
  std::unordered_set<std::uint64_t> used_keypoints;
  for (std::size_t i = 0; i < landmarks_.size(); ++i) {
    const Landmark& lm = landmarks_[i];
    const std::string who = entity("landmark", lm.id);
    if (!landmark_slots_.emplace(lm.id, i).second)
      throw ValidationError(who + ": duplicate id");
    if (lm.observations.empty())
      throw ValidationError(who + ": landmark has no observations");
    for (std::size_t o = 0; o < lm.observations.size(); ++o) {
      const Observation& obs = lm.observations[o];
      auto kf_it = keyframe_slots_.find(obs.keyframe_id);
      if (kf_it == keyframe_slots_.end())
        throw ValidationError(who + ": observation " + std::to_string(o) +
                              " references missing keyframe " +
                              std::to_string(obs.keyframe_id));
      const Keyframe& kf = keyframes_[kf_it->second];
      if (obs.keypoint_index < 0 || obs.keypoint_index >= kf.num_keypoints())
        throw ValidationError(who + ": observation " + std::to_string(o) +
                              " references keypoint " + std::to_string(obs.keypoint_index) +
                              " out of range in keyframe " + std::to_string(obs.keyframe_id));
      const std::uint64_t key = (static_cast<std::uint64_t>(kf_it->second) << 32) |
                                static_cast<std::uint64_t>(obs.keypoint_index);
      if (!used_keypoints.insert(key).second)
        throw ValidationError(who + ": keypoint " + std::to_string(obs.keypoint_index) +
                              " of keyframe " + std::to_string(obs.keyframe_id) +
                              " observes more than one landmark");
      reverse_index_[kf_it->second].push_back(lm.id);
    }
  }
  for (auto& ids : reverse_index_) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  }
}

const PinholeCamera& VisualMap::camera(std::int64_t camera_id) const {
  auto it = camera_slots_.find(camera_id);
  if (it == camera_slots_.end())
    throw ValidationError("unknown camera id " + std::to_string(camera_id));
  return cameras_[it->second].model;
}

std::size_t VisualMap::keyframe_slot(std::int64_t id) const {
  auto it = keyframe_slots_.find(id);
  if (it == keyframe_slots_.end())
    throw ValidationError("unknown keyframe id " + std::to_string(id));
  return it->second;
}

const Keyframe& VisualMap::keyframe(std::int64_t keyframe_id) const {
  return keyframes_[keyframe_slot(keyframe_id)];
}

bool VisualMap::has_keyframe(std::int64_t keyframe_id) const {
  return keyframe_slots_.count(keyframe_id) > 0;
}

const Landmark& VisualMap::landmark(std::int64_t landmark_id) const {
  auto it = landmark_slots_.find(landmark_id);
  if (it == landmark_slots_.end())
    throw ValidationError("unknown landmark id " + std::to_string(landmark_id));
  return landmarks_[it->second];
}

const std::vector<std::int64_t>& VisualMap::observed_landmarks(std::int64_t keyframe_id) const {
  return reverse_index_[keyframe_slot(keyframe_id)];
}

std::vector<std::int64_t> landmarks_of_keyframes(const VisualMap& map,
                                                 std::span<const std::int64_t> keyframe_ids) {
  std::vector<std::int64_t> out;
  for (std::int64_t id : keyframe_ids) {
    const auto& observed = map.observed_landmarks(id);
    out.insert(out.end(), observed.begin(), observed.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

json map_to_json(const VisualMap& map, MapFormat format, const std::string& sidecar_name) {
  json doc;
  doc["version"] = VisualMap::kFormatVersion;
  doc["global_descriptor_dim"] = map.global_descriptor_dim();
  doc["local_descriptor_dim"] = map.local_descriptor_dim();

  json cameras = json::array();
  for (const CameraRecord& cam : map.cameras()) {
    cameras.push_back({{"id", cam.id},
                       {"fx", cam.model.fx},
                       {"fy", cam.model.fy},
                       {"cx", cam.model.cx},
                       {"cy", cam.model.cy},
                       {"width", cam.model.width},
                       {"height", cam.model.height}});
  }
  doc["cameras"] = std::move(cameras);

  json keyframes = json::array();
  for (const Keyframe& kf : map.keyframes()) {
    json j;
    j["id"] = kf.id;
    j["camera_id"] = kf.camera_id;
    j["q_wxyz"] = pose_to_json_q(kf.pose);
    j["t_xyz"] = vec3_to_json(kf.pose.translation);
    json keypoints = json::array();
    for (Eigen::Index k = 0; k < kf.keypoints.cols(); ++k)
      keypoints.push_back(json::array({kf.keypoints(0, k), kf.keypoints(1, k)}));
    j["keypoints"] = std::move(keypoints);
    if (format == MapFormat::kText) {
      json global = json::array();
      for (Eigen::Index d = 0; d < kf.global_descriptor.size(); ++d)
        global.push_back(static_cast<double>(kf.global_descriptor[d]));
      j["global_descriptor"] = std::move(global);
      json locals = json::array();
      for (Eigen::Index k = 0; k < kf.local_descriptors.cols(); ++k) {
        json row = json::array();
        for (Eigen::Index d = 0; d < kf.local_descriptors.rows(); ++d)
          row.push_back(static_cast<double>(kf.local_descriptors(d, k)));
        locals.push_back(std::move(row));
      }
      j["local_descriptors"] = std::move(locals);
    }
    keyframes.push_back(std::move(j));
  }
  doc["keyframes"] = std::move(keyframes);

  json landmarks = json::array();
  for (const Landmark& lm : map.landmarks()) {
    json j;
    j["id"] = lm.id;
    j["p_xyz"] = vec3_to_json(lm.position);
    json observations = json::array();
    for (const Observation& obs : lm.observations)
      observations.push_back(json::array({obs.keyframe_id, obs.keypoint_index}));
    j["observations"] = std::move(observations);
    landmarks.push_back(std::move(j));
  }
  doc["landmarks"] = std::move(landmarks);

  if (format == MapFormat::kBinary) doc["descriptor_data"] = sidecar_name;
  return doc;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path sidecar = path;
  sidecar.replace_extension(".bin");
  if (sidecar == path) sidecar += ".bin";
  return sidecar;
}

}  // namespace

void save_map(const VisualMap& map, const std::filesystem::path& path, MapFormat format) {
  const std::filesystem::path sidecar = sidecar_path(path);
  const json doc = map_to_json(map, format, sidecar.filename().string());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed to write " + path.string());

  if (format == MapFormat::kBinary) {
    std::ofstream bin(sidecar, std::ios::binary);
    if (!bin) throw IoError("cannot open " + sidecar.string() + " for writing");
    Eigen::MatrixXf globals(map.global_descriptor_dim(),
                            static_cast<Eigen::Index>(map.keyframes().size()));
    for (Eigen::Index i = 0; i < globals.cols(); ++i)
      globals.col(i) = map.keyframes()[static_cast<std::size_t>(i)].global_descriptor;
    write_block(bin, globals);
    for (const Keyframe& kf : map.keyframes()) write_block(bin, kf.local_descriptors);
    if (!bin) throw IoError("failed to write " + sidecar.string());
  }
}

VisualMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open map file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("map file " + path.string() + " is not valid JSON: " + e.what());
  }

  try {
    const int version = require_field(doc, "version", "map").get<int>();
    if (version != VisualMap::kFormatVersion)
      throw ValidationError("unsupported map format version " + std::to_string(version));
    const auto global_dim =
        require_field(doc, "global_descriptor_dim", "map").get<Eigen::Index>();
    const auto local_dim =
        require_field(doc, "local_descriptor_dim", "map").get<Eigen::Index>();

    std::vector<CameraRecord> cameras;
    for (const json& j : require_field(doc, "cameras", "map")) {
      CameraRecord cam;
      cam.id = require_field(j, "id", "camera").get<std::int64_t>();
      const std::string who = entity("camera", cam.id);
      cam.model.fx = require_field(j, "fx", who).get<double>();
      cam.model.fy = require_field(j, "fy", who).get<double>();
      cam.model.cx = require_field(j, "cx", who).get<double>();
      cam.model.cy = require_field(j, "cy", who).get<double>();
      cam.model.width = require_field(j, "width", who).get<int>();
      cam.model.height = require_field(j, "height", who).get<int>();
      cameras.push_back(std::move(cam));
    }

    const bool sidecar_mode = doc.contains("descriptor_data");
    std::ifstream bin;
    if (sidecar_mode) {
      const std::filesystem::path sidecar =
          path.parent_path() / doc["descriptor_data"].get<std::string>();
      bin.open(sidecar, std::ios::binary);
      if (!bin) throw IoError("cannot open descriptor sidecar " + sidecar.string());
    }

    std::vector<Keyframe> keyframes;
    const json& kf_array = require_field(doc, "keyframes", "map");
    Eigen::MatrixXf globals;
    if (sidecar_mode) {
      globals = read_block_f32(bin, "global descriptor block");
      if (globals.rows() != global_dim && globals.cols() > 0)
        throw ValidationError("global descriptor block dimension mismatch");
      if (globals.cols() != static_cast<Eigen::Index>(kf_array.size()))
        throw ValidationError("global descriptor block count mismatch");
    }
    Eigen::Index kf_slot = 0;
    for (const json& j : kf_array) {
      Keyframe kf;
      kf.id = require_field(j, "id", "keyframe").get<std::int64_t>();
      const std::string who = entity("keyframe", kf.id);
      kf.camera_id = require_field(j, "camera_id", who).get<std::int64_t>();
      kf.pose = parse_pose(require_field(j, "q_wxyz", who), require_field(j, "t_xyz", who), who);

      const json& keypoints = require_field(j, "keypoints", who);
      kf.keypoints.resize(2, static_cast<Eigen::Index>(keypoints.size()));
      for (Eigen::Index k = 0; k < kf.keypoints.cols(); ++k) {
        const json& px = keypoints[static_cast<std::size_t>(k)];
        if (!px.is_array() || px.size() != 2)
          throw ValidationError(who + ": keypoint " + std::to_string(k) +
                                " must be a [u, v] pair");
        kf.keypoints(0, k) = px[0].get<double>();
        kf.keypoints(1, k) = px[1].get<double>();
      }

      if (sidecar_mode) {
        kf.global_descriptor = globals.col(kf_slot);
        kf.local_descriptors = read_block_f32(bin, who + " local descriptor block");
        if (kf.local_descriptors.cols() > 0 && kf.local_descriptors.rows() != local_dim)
          throw ValidationError(who + ": local descriptor block dimension mismatch");
        if (kf.local_descriptors.cols() != kf.keypoints.cols())
          throw ValidationError(who + ": local descriptor block count mismatch");
      } else {
        const json& global = require_field(j, "global_descriptor", who);
        kf.global_descriptor.resize(static_cast<Eigen::Index>(global.size()));
        for (Eigen::Index d = 0; d < kf.global_descriptor.size(); ++d)
          kf.global_descriptor[d] =
              static_cast<float>(global[static_cast<std::size_t>(d)].get<double>());
        const json& locals = require_field(j, "local_descriptors", who);
        kf.local_descriptors.resize(local_dim, static_cast<Eigen::Index>(locals.size()));
        for (Eigen::Index k = 0; k < kf.local_descriptors.cols(); ++k) {
          const json& row = locals[static_cast<std::size_t>(k)];
          if (static_cast<Eigen::Index>(row.size()) != local_dim)
            throw ValidationError(who + ": local descriptor " + std::to_string(k) +
                                  " dimension mismatch");
          for (Eigen::Index d = 0; d < local_dim; ++d)
            kf.local_descriptors(d, k) =
                static_cast<float>(row[static_cast<std::size_t>(d)].get<double>());
        }
      }
      keyframes.push_back(std::move(kf));
      ++kf_slot;
    }

    std::vector<Landmark> landmarks;
    for (const json& j : require_field(doc, "landmarks", "map")) {
      Landmark lm;
      lm.id = require_field(j, "id", "landmark").get<std::int64_t>();
      const std::string who = entity("landmark", lm.id);
      lm.position = parse_vec3(require_field(j, "p_xyz", who), who);
      for (const json& o : require_field(j, "observations", who)) {
        if (!o.is_array() || o.size() != 2)
          throw ValidationError(who + ": observation must be a [keyframe_id, keypoint_index] pair");
        lm.observations.push_back(
            Observation{o[0].get<std::int64_t>(), o[1].get<Eigen::Index>()});
      }
      landmarks.push_back(std::move(lm));
    }

    return VisualMap(std::move(cameras), global_dim, local_dim, std::move(keyframes),
                     std::move(landmarks));
  } catch (const json::exception& e) {
    throw ValidationError("map file " + path.string() + ": " + e.what());
  }
}

}  // namespace hloc
