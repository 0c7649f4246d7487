#include "hloc/pnp.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

#include "hloc/errors.hpp"
#include "hloc/rng.hpp"

namespace hloc {

namespace {

// Real roots of sum_i coeffs[i] x^(n-i) via the companion matrix, then one
// round of Newton polishing on the polynomial itself.
std::vector<double> real_roots(std::vector<double> coeffs) {
  const double scale = std::abs(*std::max_element(
      coeffs.begin(), coeffs.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }));
  if (scale == 0.0) return {};
  // Trim a (near-)vanishing leading coefficient: the quartic degenerates.
  std::size_t first = 0;
  while (first + 1 < coeffs.size() && std::abs(coeffs[first]) < 1e-14 * scale) ++first;
  coeffs.erase(coeffs.begin(), coeffs.begin() + static_cast<std::ptrdiff_t>(first));
  const std::size_t degree = coeffs.size() - 1;
  if (degree == 0) return {};

  const auto eval = [&coeffs](double x, double& fx, double& dfx) {
    fx = coeffs[0];
    dfx = 0.0;
    for (std::size_t i = 1; i < coeffs.size(); ++i) {
      dfx = dfx * x + fx;
      fx = fx * x + coeffs[i];
    }
  };

  if (degree == 1) return {-coeffs[1] / coeffs[0]};

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(degree),
                                                    static_cast<Eigen::Index>(degree));
  for (std::size_t i = 1; i <= degree; ++i)
    companion(0, static_cast<Eigen::Index>(i - 1)) = -coeffs[i] / coeffs[0];
  for (std::size_t i = 1; i < degree; ++i)
    companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;

  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
  std::vector<double> roots;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const std::complex<double> z = solver.eigenvalues()[i];
    if (std::abs(z.imag()) > 1e-8 * std::max(1.0, std::abs(z.real()))) continue;
    double x = z.real();
    for (int it = 0; it < 3; ++it) {
      double fx, dfx;
      eval(x, fx, dfx);
      if (std::abs(dfx) < 1e-30) break;
      const double step = fx / dfx;
      x -= step;
      if (std::abs(step) < 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

}  // namespace

std::vector<Pose> solve_p3p(const std::array<Eigen::Vector3d, 3>& bearings,
                            const std::array<Eigen::Vector3d, 3>& points) {
  for (const Eigen::Vector3d& f : bearings)
    if (std::abs(f.norm() - 1.0) > 1e-6)
      throw ValidationError("p3p: bearings must be unit vectors");
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (bearings[i].cross(bearings[j]).norm() < 1e-9)
        throw ValidationError("p3p: coincident bearings");

  const double a2 = (points[1] - points[2]).squaredNorm();
  const double b2 = (points[0] - points[2]).squaredNorm();
  const double c2 = (points[0] - points[1]).squaredNorm();
  if (a2 < 1e-18 || b2 < 1e-18 || c2 < 1e-18)
    throw ValidationError("p3p: coincident world points");
  if ((points[1] - points[0]).cross(points[2] - points[0]).norm() < 2e-12)
    throw ValidationError("p3p: collinear world points");

  const double p = 2.0 * bearings[1].dot(bearings[2]);
  const double q = 2.0 * bearings[0].dot(bearings[2]);
  const double r = 2.0 * bearings[0].dot(bearings[1]);

  // Quartic in v = s3/s1 from the three law-of-cosines constraints
  //   a2 = s2^2 + s3^2 - p s2 s3,  b2 = s1^2 + s3^2 - q s1 s3,
  //   c2 = s1^2 + s2^2 - r s1 s2
  // after eliminating u = s2/s1 (coefficients machine-derived and verified
  // against synthetic ground truth).
  const std::vector<double> quartic{
      -b2 * (-a2 * a2 + 2 * a2 * b2 + 2 * a2 * c2 - b2 * b2 + b2 * c2 * p * p - 2 * b2 * c2 -
             c2 * c2),
      b2 * (-2 * a2 * a2 * q + a2 * b2 * p * r + 2 * a2 * b2 * q + 4 * a2 * c2 * q -
            b2 * b2 * p * r + b2 * c2 * p * p * q + b2 * c2 * p * r - 2 * b2 * c2 * q -
            2 * c2 * c2 * q),
      b2 * (a2 * a2 * q * q + 2 * a2 * a2 - a2 * b2 * p * q * r - a2 * b2 * r * r -
            2 * a2 * c2 * q * q - 4 * a2 * c2 + b2 * b2 * p * p + b2 * b2 * r * r - 2 * b2 * b2 -
            b2 * c2 * p * p - b2 * c2 * p * q * r + c2 * c2 * q * q + 2 * c2 * c2),
      b2 * (-2 * a2 * a2 * q + a2 * b2 * p * r + a2 * b2 * q * r * r - 2 * a2 * b2 * q +
            4 * a2 * c2 * q - b2 * b2 * p * r + b2 * c2 * p * r + 2 * b2 * c2 * q -
            2 * c2 * c2 * q),
      -b2 * (-a2 * a2 + a2 * b2 * r * r - 2 * a2 * b2 + 2 * a2 * c2 - b2 * b2 + 2 * b2 * c2 -
             c2 * c2)};

  Eigen::Matrix3d world;
  for (int i = 0; i < 3; ++i) world.col(i) = points[static_cast<std::size_t>(i)];

  std::vector<Pose> poses;
  for (double v : real_roots(quartic)) {
    if (!(v > 0.0) || !std::isfinite(v)) continue;

    // u from the linear elimination; fall back to the quadratic constraint
    // when its denominator vanishes.
    std::vector<double> u_candidates;
    const double denom = b2 * (p * v - r);
    if (std::abs(denom) > 1e-12 * b2) {
      u_candidates.push_back(
          ((b2 + c2 - a2) * v * v + (a2 - c2) * q * v + (c2 - a2 - b2)) / denom);
    } else {
      // c2 = s1^2 (1 + u^2 - r u) and b2 = s1^2 (1 + v^2 - q v):
      // u^2 - r u + 1 - (c2/b2)(1 + v^2 - q v) = 0.
      const double cc = 1.0 - (c2 / b2) * (1.0 + v * v - q * v);
      const double disc = r * r / 4.0 - cc;
      if (disc < 0.0) continue;
      u_candidates.push_back(r / 2.0 + std::sqrt(disc));
      u_candidates.push_back(r / 2.0 - std::sqrt(disc));
    }

    for (double u : u_candidates) {
      if (!(u > 0.0) || !std::isfinite(u)) continue;
      const double s1_den = 1.0 + v * v - q * v;
      if (s1_den <= 0.0) continue;
      Eigen::Vector3d s(std::sqrt(b2 / s1_den), 0.0, 0.0);
      s[1] = u * s[0];
      s[2] = v * s[0];

      // Newton-polish the three distances on the original constraints to
      // remove quartic round-off.
      for (int it = 0; it < 5; ++it) {
        const Eigen::Vector3d f(
            s[1] * s[1] + s[2] * s[2] - p * s[1] * s[2] - a2,
            s[0] * s[0] + s[2] * s[2] - q * s[0] * s[2] - b2,
            s[0] * s[0] + s[1] * s[1] - r * s[0] * s[1] - c2);
        if (f.cwiseAbs().maxCoeff() < 1e-14 * std::max({a2, b2, c2})) break;
        Eigen::Matrix3d jac;
        jac << 0.0, 2 * s[1] - p * s[2], 2 * s[2] - p * s[1],
            2 * s[0] - q * s[2], 0.0, 2 * s[2] - q * s[0],
            2 * s[0] - r * s[1], 2 * s[1] - r * s[0], 0.0;
        const Eigen::Vector3d step = jac.partialPivLu().solve(f);
        if (!step.allFinite()) break;
        s -= step;
      }
      if (!(s.minCoeff() > 0.0)) continue;

      // Camera-frame points, then rigid alignment world -> camera.
      Eigen::Matrix3d cam;
      for (int i = 0; i < 3; ++i) cam.col(i) = s[i] * bearings[static_cast<std::size_t>(i)];
      const Eigen::Matrix4d t = Eigen::umeyama(world, cam, /*with_scaling=*/false);
      Pose pose;
      pose.rotation = Eigen::Quaterniond(Eigen::Matrix3d(t.topLeftCorner<3, 3>())).normalized();
      pose.translation = t.topRightCorner<3, 1>();

      // Accept only poses that really satisfy the bearing constraints.
      bool ok = true;
      for (int i = 0; i < 3; ++i) {
        const Eigen::Vector3d w = pose.apply(points[static_cast<std::size_t>(i)]);
        const double angle =
            std::atan2(w.cross(bearings[static_cast<std::size_t>(i)]).norm(),
                       w.dot(bearings[static_cast<std::size_t>(i)]));
        if (!(angle < 1e-6)) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;

      const bool duplicate = std::any_of(poses.begin(), poses.end(), [&](const Pose& other) {
        return other.rotation.angularDistance(pose.rotation) < 1e-9 &&
               (other.translation - pose.translation).norm() < 1e-9;
      });
      if (!duplicate) poses.push_back(pose);
    }
  }
  return poses;
}

Pose apply_increment(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta) {
  return compose(Pose{quaternion_exp(delta.head<3>()), delta.tail<3>()}, pose);
}

Eigen::Vector2d reprojection_residual(const PinholeCamera& camera, const Pose& pose,
                                      const Eigen::Vector3d& point_world,
                                      const Eigen::Vector2d& observed_px) {
  const Eigen::Vector3d v = pose.apply(point_world);
  return {camera.fx * v.x() / v.z() + camera.cx - observed_px.x(),
          camera.fy * v.y() / v.z() + camera.cy - observed_px.y()};
}

Eigen::Matrix<double, 2, 6> reprojection_jacobian(const PinholeCamera& camera, const Pose& pose,
                                                  const Eigen::Vector3d& point_world) {
  const Eigen::Vector3d v = pose.apply(point_world);
  const double iz = 1.0 / v.z();
  Eigen::Matrix<double, 2, 3> proj;
  proj << camera.fx * iz, 0.0, -camera.fx * v.x() * iz * iz,
      0.0, camera.fy * iz, -camera.fy * v.y() * iz * iz;
  // Left increment: v' = exp(w) v + dt, so dv/dw = -[v]x and dv/ddt = I.
  Eigen::Matrix<double, 3, 6> motion;
  motion << 0.0, v.z(), -v.y(), 1.0, 0.0, 0.0,
      -v.z(), 0.0, v.x(), 0.0, 1.0, 0.0,
      v.y(), -v.x(), 0.0, 0.0, 0.0, 1.0;
  return proj * motion;
}

namespace {

struct Correspondence {
  Eigen::Vector3d point;
  Eigen::Vector2d pixel;
  Eigen::Vector3d bearing;
};

// Squared reprojection error, or nullopt when the point is not in front.
std::optional<double> reprojection_error_sq(const PinholeCamera& camera, const Pose& pose,
                                            const Correspondence& c) {
  const auto px = project(camera, pose, c.point);
  if (!px) return std::nullopt;
  return (*px - c.pixel).squaredNorm();
}

double total_cost(const PinholeCamera& camera, const Pose& pose,
                  const std::vector<const Correspondence*>& active) {
  double cost = 0.0;
  for (const Correspondence* c : active) {
    const Eigen::Vector3d v = pose.apply(c->point);
    if (v.z() <= 1e-9) return std::numeric_limits<double>::infinity();
    cost += reprojection_residual(camera, pose, c->point, c->pixel).squaredNorm();
  }
  return cost;
}

// Levenberg-Marquardt over the given correspondences. Fixed budget: stops on
// a sub-1e-10 step or after 50 accepted/rejected iterations.
Pose refine_pose(const PinholeCamera& camera, Pose pose,
                 const std::vector<const Correspondence*>& active) {
  double lambda = 1e-3;
  double cost = total_cost(camera, pose, active);
  for (int it = 0; it < 50; ++it) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (const Correspondence* c : active) {
      const Eigen::Vector3d v = pose.apply(c->point);
      if (v.z() <= 1e-9) continue;
      const Eigen::Matrix<double, 2, 6> jac = reprojection_jacobian(camera, pose, c->point);
      const Eigen::Vector2d res = reprojection_residual(camera, pose, c->point, c->pixel);
      h += jac.transpose() * jac;
      g += jac.transpose() * res;
    }
    const Eigen::Matrix<double, 6, 6> damped =
        h + lambda * Eigen::Matrix<double, 6, 6>(h.diagonal().asDiagonal());
    const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(-g);
    if (!delta.allFinite()) break;
    if (delta.norm() < 1e-10) break;
    const Pose trial = apply_increment(pose, delta);
    const double trial_cost = total_cost(camera, trial, active);
    if (trial_cost < cost) {
      pose = trial;
      cost = trial_cost;
      lambda = std::max(lambda * 0.5, 1e-12);
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }
  return pose;
}

}  // namespace

PnpOutcome ransac_pnp(const std::vector<Match2D3D>& matches,
                      const std::function<Eigen::Vector3d(std::int64_t)>& landmark_position,
                      const QueryFrame& query, const RansacParams& params) {
  if (params.reprojection_threshold_px <= 0.0)
    throw ValidationError("ransac: reprojection threshold must be positive");
  if (params.confidence <= 0.0 || params.confidence >= 1.0)
    throw ValidationError("ransac: confidence must be in (0, 1)");
  if (params.max_iterations < 1) throw ValidationError("ransac: max_iterations must be >= 1");
  if (params.min_inliers < 4) throw ValidationError("ransac: min_inliers must be >= 4");

  const std::size_t n = matches.size();
  if (n < 4) return {std::nullopt, NoPoseReason::kInsufficientMatches};

  std::vector<Correspondence> corr(n);
  for (std::size_t i = 0; i < n; ++i) {
    corr[i].point = landmark_position(matches[i].landmark_id);
    corr[i].pixel = query.keypoints.col(matches[i].keypoint_index);
    corr[i].bearing = bearing(query.camera, corr[i].pixel);
  }

  const double threshold_sq =
      params.reprojection_threshold_px * params.reprojection_threshold_px;
  const auto count_inliers = [&](const Pose& pose, std::vector<bool>* mask,
                                 double* mean_error) {
    int count = 0;
    double error_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto err_sq = reprojection_error_sq(query.camera, pose, corr[i]);
      const bool inlier = err_sq.has_value() && *err_sq <= threshold_sq;
      if (mask) (*mask)[i] = inlier;
      if (inlier) {
        ++count;
        error_sum += std::sqrt(*err_sq);
      }
    }
    if (mean_error) *mean_error = count > 0 ? error_sum / count : 0.0;
    return count;
  };

  Rng rng(params.rng_seed);
  Pose best_pose;
  int best_count = 0;
  double best_mean_error = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int needed = params.max_iterations;

  while (iterations < needed) {
    ++iterations;

    // 4 distinct matches: 3 to solve, 1 to pick among the P3P candidates.
    std::array<std::size_t, 4> pick{};
    for (std::size_t s = 0; s < 4; ++s) {
      std::size_t candidate;
      bool fresh;
      do {
        candidate = rng.uniform_index(n);
        fresh = true;
        for (std::size_t t = 0; t < s; ++t) fresh = fresh && pick[t] != candidate;
      } while (!fresh);
      pick[s] = candidate;
    }

    std::vector<Pose> candidates;
    try {
      candidates = solve_p3p(
          {corr[pick[0]].bearing, corr[pick[1]].bearing, corr[pick[2]].bearing},
          {corr[pick[0]].point, corr[pick[1]].point, corr[pick[2]].point});
    } catch (const ValidationError&) {
      continue;  // degenerate sample; try another
    }
    if (candidates.empty()) continue;

    // Disambiguate with the 4th match.
    const Pose* chosen = nullptr;
    double chosen_err = std::numeric_limits<double>::infinity();
    for (const Pose& cand : candidates) {
      const auto err = reprojection_error_sq(query.camera, cand, corr[pick[3]]);
      if (err && *err < chosen_err) {
        chosen_err = *err;
        chosen = &cand;
      }
    }
    if (!chosen) continue;

    double mean_error = 0.0;
    const int count = count_inliers(*chosen, nullptr, &mean_error);
    if (count > best_count || (count == best_count && mean_error < best_mean_error)) {
      best_count = count;
      best_mean_error = mean_error;
      best_pose = *chosen;

      // Adaptive stop: enough iterations that missing an all-inlier sample
      // has probability below 1 - confidence.
      const double w = static_cast<double>(count) / static_cast<double>(n);
      if (w >= 1.0) {
        needed = iterations;
      } else {
        const double denom = std::log1p(-std::pow(w, 4));
        if (denom < 0.0) {
          const double est = std::ceil(std::log(1.0 - params.confidence) / denom);
          needed = static_cast<int>(
              std::clamp(est, 1.0, static_cast<double>(params.max_iterations)));
        }
      }
    }
  }

  if (best_count < 4) return {std::nullopt, NoPoseReason::kInsufficientInliers};

  std::vector<bool> mask(n, false);
  count_inliers(best_pose, &mask, nullptr);
  Pose final_pose = best_pose;
  int final_count = best_count;

  if (params.refine) {
    std::vector<const Correspondence*> active;
    for (std::size_t i = 0; i < n; ++i)
      if (mask[i]) active.push_back(&corr[i]);
    const Pose refined = refine_pose(query.camera, best_pose, active);
    std::vector<bool> refined_mask(n, false);
    const int refined_count = count_inliers(refined, &refined_mask, nullptr);
    // Keep the refinement only if it did not lose support.
    if (refined_count >= best_count) {
      final_pose = refined;
      final_count = refined_count;
      mask = refined_mask;
    }
  }

  if (final_count < params.min_inliers)
    return {std::nullopt, NoPoseReason::kInsufficientInliers};

  PoseEstimate estimate;
  estimate.pose = final_pose;
  estimate.num_iterations_used = iterations;
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i]) estimate.inlier_matches.push_back(matches[i]);
  return {std::move(estimate), NoPoseReason::kInsufficientInliers};
}

}  // namespace hloc
