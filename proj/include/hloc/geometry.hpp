#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <optional>

namespace hloc {

/// Rigid world-to-camera transform: p_cam = R * p_world + t.
/// Quaternion is kept unit-norm; storage order in files is (w, x, y, z).
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return Pose{}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p_world) const {
    return rotation * p_world + translation;
  }

  /// Camera center in world coordinates: -R^T t.
  Eigen::Vector3d center() const {
    return rotation.conjugate() * (-translation);
  }
};

/// Pinhole intrinsics. Convention: +z forward, +x right, +y down,
/// pixel origin at the top-left corner. Keypoints are pre-undistorted.
struct PinholeCamera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  bool contains(const Eigen::Vector2d& px) const {
    return px.x() >= 0.0 && px.x() <= width && px.y() >= 0.0 && px.y() <= height;
  }
};

inline Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

inline Pose inverse(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.conjugate();
  out.translation = p.rotation.conjugate() * (-p.translation);
  return out;
}

/// Projects a world point. Returns nullopt when the point is not strictly
/// in front of the camera (z <= 1e-9); callers treat that as a non-inlier,
/// not an error.
inline std::optional<Eigen::Vector2d> project(const PinholeCamera& camera, const Pose& pose,
                                              const Eigen::Vector3d& point_world) {
  const Eigen::Vector3d p = pose.apply(point_world);
  if (p.z() <= 1e-9) return std::nullopt;
  return Eigen::Vector2d(camera.fx * p.x() / p.z() + camera.cx,
                         camera.fy * p.y() / p.z() + camera.cy);
}

/// Unit viewing ray in the camera frame through a pixel.
inline Eigen::Vector3d bearing(const PinholeCamera& camera, const Eigen::Vector2d& pixel) {
  Eigen::Vector3d ray((pixel.x() - camera.cx) / camera.fx,
                      (pixel.y() - camera.cy) / camera.fy, 1.0);
  return ray.normalized();
}

struct PoseError {
  double position_m = 0.0;
  double angle_deg = 0.0;
};

/// Position term is the distance between camera centers; angle term is the
/// rotation angle of Ra * Rb^T in degrees, in [0, 180]. Symmetric in (a, b)
/// and insensitive to the quaternion double cover.
inline PoseError pose_error(const Pose& a, const Pose& b) {
  PoseError err;
  err.position_m = (a.center() - b.center()).norm();
  const Eigen::Quaterniond rel = a.rotation * b.rotation.conjugate();
  const double angle_rad = 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
  err.angle_deg = angle_rad * 180.0 / M_PI;
  return err;
}

/// Unit quaternion from a rotation vector (axis * angle).
inline Eigen::Quaterniond quaternion_exp(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) {
    Eigen::Quaterniond q(1.0, 0.5 * omega.x(), 0.5 * omega.y(), 0.5 * omega.z());
    return q.normalized();
  }
  const double half = 0.5 * theta;
  const Eigen::Vector3d axis = omega / theta;
  const double s = std::sin(half);
  return Eigen::Quaterniond(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
}

}  // namespace hloc
