#include "hloc/pnp.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

#include "hloc/errors.hpp"
#include "hloc/rng.hpp"

using namespace hloc;

namespace {

const PinholeCamera kCamera{500.0, 500.0, 320.0, 240.0, 640, 480};

Pose random_pose(Rng& rng, double rotation_scale = 1.0, double translation_scale = 2.0) {
  Pose p;
  p.rotation = quaternion_exp(Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) *
                              rotation_scale);
  p.translation = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * translation_scale;
  return p;
}

// A camera view with pixel-perfect observations: world points are chosen by
// sampling pixels inside the image and depths along their rays.
struct Scene {
  Pose pose;  // world -> camera, the ground truth
  std::vector<Eigen::Vector3d> points_world;
  QueryFrame query;
  std::vector<Match2D3D> matches;

  Eigen::Vector3d position(std::int64_t id) const {
    return points_world[static_cast<std::size_t>(id)];
  }
};

Scene make_scene(Rng& rng, int n) {
  Scene scene;
  scene.pose = random_pose(rng);
  const Pose cam_to_world = inverse(scene.pose);
  scene.query.camera = kCamera;
  scene.query.keypoints.resize(2, n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d px(rng.uniform(10.0, 630.0), rng.uniform(10.0, 470.0));
    const double depth = rng.uniform(2.0, 8.0);
    const Eigen::Vector3d ray((px.x() - kCamera.cx) / kCamera.fx,
                              (px.y() - kCamera.cy) / kCamera.fy, 1.0);
    scene.points_world.push_back(cam_to_world.apply(ray * depth));
    scene.query.keypoints.col(i) = px;
    scene.matches.push_back({i, i, 0.0f});
  }
  return scene;
}

bool close_to(const Pose& a, const Pose& b, double tol_m, double tol_rad) {
  return (a.translation - b.translation).norm() < tol_m &&
         a.rotation.angularDistance(b.rotation) < tol_rad;
}

}  // namespace

TEST_SUITE("pnp") {

TEST_CASE("p3p recovers the identity pose from a constructed view") {
  const std::array<Eigen::Vector3d, 3> points{Eigen::Vector3d(1, 0, 5), Eigen::Vector3d(-1, 0, 5),
                                              Eigen::Vector3d(0, 1, 5)};
  const std::array<Eigen::Vector3d, 3> bearings{points[0].normalized(), points[1].normalized(),
                                                points[2].normalized()};
  const auto poses = solve_p3p(bearings, points);
  REQUIRE(!poses.empty());
  const bool found = std::any_of(poses.begin(), poses.end(), [](const Pose& p) {
    return close_to(p, Pose::identity(), 1e-9, 1e-9);
  });
  CHECK(found);
}

TEST_CASE("p3p roundtrips random configurations") {
  Rng rng(81);
  int trials = 0;
  while (trials < 2000) {
    const Scene scene = make_scene(rng, 3);
    std::array<Eigen::Vector3d, 3> bearings, points;
    for (int i = 0; i < 3; ++i) {
      bearings[static_cast<std::size_t>(i)] =
          bearing(kCamera, scene.query.keypoints.col(i));
      points[static_cast<std::size_t>(i)] = scene.points_world[static_cast<std::size_t>(i)];
    }
    std::vector<Pose> poses;
    try {
      poses = solve_p3p(bearings, points);
    } catch (const ValidationError&) {
      continue;  // the random scene happened to be degenerate; roll again
    }
    ++trials;
    const bool found = std::any_of(poses.begin(), poses.end(), [&](const Pose& p) {
      return close_to(p, scene.pose, 1e-6, 1e-6);
    });
    REQUIRE(found);
    // Postcondition: every returned pose honors the bearing constraints.
    for (const Pose& p : poses) {
      for (int i = 0; i < 3; ++i) {
        const Eigen::Vector3d v = p.apply(points[static_cast<std::size_t>(i)]);
        const double angle =
            std::atan2(v.cross(bearings[static_cast<std::size_t>(i)]).norm(),
                       v.dot(bearings[static_cast<std::size_t>(i)]));
        REQUIRE(angle < 1e-6);
      }
    }
  }
}

TEST_CASE("p3p rejects degenerate configurations") {
  const Eigen::Vector3d f0 = Eigen::Vector3d(0, 0, 1);
  const Eigen::Vector3d f1 = Eigen::Vector3d(0.1, 0, 1).normalized();
  const Eigen::Vector3d f2 = Eigen::Vector3d(0, 0.1, 1).normalized();

  SUBCASE("collinear world points") {
    CHECK_THROWS_AS(solve_p3p({f0, f1, f2}, {Eigen::Vector3d(0, 0, 5), Eigen::Vector3d(1, 0, 5),
                                             Eigen::Vector3d(2, 0, 5)}),
                    ValidationError);
  }
  SUBCASE("coincident world points") {
    CHECK_THROWS_AS(solve_p3p({f0, f1, f2}, {Eigen::Vector3d(0, 0, 5), Eigen::Vector3d(0, 0, 5),
                                             Eigen::Vector3d(0, 1, 5)}),
                    ValidationError);
  }
  SUBCASE("coincident bearings") {
    CHECK_THROWS_AS(solve_p3p({f0, f0, f2}, {Eigen::Vector3d(0, 0, 5), Eigen::Vector3d(1, 0, 5),
                                             Eigen::Vector3d(0, 1, 5)}),
                    ValidationError);
  }
  SUBCASE("non-unit bearing") {
    CHECK_THROWS_AS(solve_p3p({2.0 * f0, f1, f2},
                              {Eigen::Vector3d(0, 0, 5), Eigen::Vector3d(1, 0, 5),
                               Eigen::Vector3d(0, 1, 5)}),
                    ValidationError);
  }
}

TEST_CASE("ransac on exact matches recovers the pose with full support") {
  Rng rng(82);
  const Scene scene = make_scene(rng, 100);
  RansacParams params;
  const auto outcome = ransac_pnp(
      scene.matches, [&](std::int64_t id) { return scene.position(id); }, scene.query, params);
  REQUIRE(outcome.estimate.has_value());
  CHECK(outcome.estimate->inlier_matches.size() == 100);
  CHECK(close_to(outcome.estimate->pose, scene.pose, 1e-6, 1e-6));
}

TEST_CASE("too few matches fail with the right reason") {
  Rng rng(83);
  const Scene scene = make_scene(rng, 3);
  const auto outcome = ransac_pnp(
      scene.matches, [&](std::int64_t id) { return scene.position(id); }, scene.query,
      RansacParams{});
  CHECK(!outcome.estimate.has_value());
  CHECK(outcome.failure_reason == NoPoseReason::kInsufficientMatches);
}

TEST_CASE("ransac survives 50% outliers and half-pixel noise") {
  Rng rng(84);
  int successes = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    Scene scene = make_scene(rng, 200);
    Rng noise = rng.fork("noise", static_cast<std::uint64_t>(trial));
    for (int i = 0; i < 200; ++i) {
      if (i % 2 == 1) {  // outlier: replace with an unrelated pixel
        scene.query.keypoints.col(i) << noise.uniform(0.0, 640.0), noise.uniform(0.0, 480.0);
      } else {
        scene.query.keypoints.col(i) += Eigen::Vector2d(noise.normal(), noise.normal()) * 0.5;
      }
    }
    RansacParams params;
    params.rng_seed = static_cast<std::uint64_t>(trial) + 1000;
    const auto outcome = ransac_pnp(
        scene.matches, [&](std::int64_t id) { return scene.position(id); }, scene.query, params);
    if (!outcome.estimate) continue;
    const double position_error =
        (inverse(outcome.estimate->pose).translation - inverse(scene.pose).translation).norm();
    if (position_error < 0.01 &&
        outcome.estimate->inlier_matches.size() >= 20)  // 0.1 * 200 matches
      ++successes;
  }
  CHECK(successes == trials);
}

TEST_CASE("every reported inlier reprojects within the threshold") {
  Rng rng(85);
  Scene scene = make_scene(rng, 80);
  for (int i = 0; i < 80; ++i)
    scene.query.keypoints.col(i) += Eigen::Vector2d(rng.normal(), rng.normal()) * 1.0;
  RansacParams params;
  const auto outcome = ransac_pnp(
      scene.matches, [&](std::int64_t id) { return scene.position(id); }, scene.query, params);
  REQUIRE(outcome.estimate.has_value());
  const double thr_sq = params.reprojection_threshold_px * params.reprojection_threshold_px;
  for (const Match2D3D& m : outcome.estimate->inlier_matches) {
    const auto px = project(scene.query.camera, outcome.estimate->pose,
                            scene.position(m.landmark_id));
    REQUIRE(px.has_value());
    CHECK((*px - Eigen::Vector2d(scene.query.keypoints.col(m.keypoint_index))).squaredNorm() <=
          thr_sq);
  }
}

TEST_CASE("identical seeds reproduce the estimate bit for bit") {
  Rng rng(86);
  Scene scene = make_scene(rng, 60);
  for (int i = 0; i < 60; i += 3)
    scene.query.keypoints.col(i) += Eigen::Vector2d(rng.normal(), rng.normal()) * 2.0;
  RansacParams params;
  params.rng_seed = 7;
  const auto a = ransac_pnp(
      scene.matches, [&](std::int64_t id) { return scene.position(id); }, scene.query, params);
  const auto b = ransac_pnp(
      scene.matches, [&](std::int64_t id) { return scene.position(id); }, scene.query, params);
  REQUIRE(a.estimate.has_value());
  REQUIRE(b.estimate.has_value());
  CHECK(a.estimate->pose.rotation.coeffs() == b.estimate->pose.rotation.coeffs());
  CHECK(a.estimate->pose.translation == b.estimate->pose.translation);
  CHECK(a.estimate->num_iterations_used == b.estimate->num_iterations_used);
  REQUIRE(a.estimate->inlier_matches.size() == b.estimate->inlier_matches.size());
  for (std::size_t i = 0; i < a.estimate->inlier_matches.size(); ++i)
    CHECK(a.estimate->inlier_matches[i].keypoint_index ==
          b.estimate->inlier_matches[i].keypoint_index);
}

TEST_CASE("min_inliers gates validity") {
  Rng rng(87);
  Scene scene = make_scene(rng, 12);
  // Corrupt 4 of the 12 matches beyond repair: at most 8 inliers remain,
  // below the default requirement of 12. A wrapped half-image shift keeps
  // every corrupted pixel at least 250px from its true projection.
  for (int i = 8; i < 12; ++i) {
    scene.query.keypoints.col(i) += Eigen::Vector2d(250.0, 180.0);
    scene.query.keypoints(0, i) = std::fmod(scene.query.keypoints(0, i), 640.0);
    scene.query.keypoints(1, i) = std::fmod(scene.query.keypoints(1, i), 480.0);
  }
  RansacParams params;
  params.rng_seed = 11;
  const auto rejected = ransac_pnp(
      scene.matches, [&](std::int64_t id) { return scene.position(id); }, scene.query, params);
  CHECK(!rejected.estimate.has_value());
  CHECK(rejected.failure_reason == NoPoseReason::kInsufficientInliers);

  params.min_inliers = 4;
  const auto accepted = ransac_pnp(
      scene.matches, [&](std::int64_t id) { return scene.position(id); }, scene.query, params);
  REQUIRE(accepted.estimate.has_value());
  CHECK(accepted.estimate->inlier_matches.size() >= 8);
  CHECK(close_to(accepted.estimate->pose, scene.pose, 1e-3, 1e-3));
}

TEST_CASE("refinement never reports fewer inliers than the raw consensus") {
  Rng rng(88);
  for (int trial = 0; trial < 10; ++trial) {
    Scene scene = make_scene(rng, 100);
    for (int i = 0; i < 100; ++i)
      scene.query.keypoints.col(i) += Eigen::Vector2d(rng.normal(), rng.normal()) * 1.5;
    RansacParams with;
    with.rng_seed = static_cast<std::uint64_t>(trial);
    RansacParams without = with;
    without.refine = false;
    const auto refined = ransac_pnp(
        scene.matches, [&](std::int64_t id) { return scene.position(id); }, scene.query, with);
    const auto raw = ransac_pnp(
        scene.matches, [&](std::int64_t id) { return scene.position(id); }, scene.query,
        without);
    REQUIRE(refined.estimate.has_value());
    REQUIRE(raw.estimate.has_value());
    CHECK(refined.estimate->inlier_matches.size() >= raw.estimate->inlier_matches.size());
  }
}

TEST_CASE("analytic Jacobian matches central finite differences") {
  Rng rng(89);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const Pose pose = random_pose(rng, 0.8, 1.5);
    // A point safely in front of the camera.
    const Eigen::Vector3d point =
        inverse(pose).apply(Eigen::Vector3d(rng.uniform(-2, 2), rng.uniform(-2, 2),
                                            rng.uniform(2.0, 8.0)));
    const Eigen::Vector2d observed(rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0));

    const Eigen::Matrix<double, 2, 6> analytic = reprojection_jacobian(kCamera, pose, point);
    Eigen::Matrix<double, 2, 6> numeric;
    for (int j = 0; j < 6; ++j) {
      Eigen::Matrix<double, 6, 1> delta = Eigen::Matrix<double, 6, 1>::Zero();
      delta[j] = h;
      const Eigen::Vector2d plus =
          reprojection_residual(kCamera, apply_increment(pose, delta), point, observed);
      delta[j] = -h;
      const Eigen::Vector2d minus =
          reprojection_residual(kCamera, apply_increment(pose, delta), point, observed);
      numeric.col(j) = (plus - minus) / (2.0 * h);
    }
    const double scale = std::max(1.0, analytic.norm());
    CHECK((analytic - numeric).norm() / scale < 1e-5);
  }
}

TEST_CASE("parameter validation") {
  Rng rng(90);
  const Scene scene = make_scene(rng, 10);
  const auto lookup = [&](std::int64_t id) { return scene.position(id); };
  RansacParams params;
  params.reprojection_threshold_px = 0.0;
  CHECK_THROWS_AS(ransac_pnp(scene.matches, lookup, scene.query, params), ValidationError);
  params = RansacParams{};
  params.confidence = 1.0;
  CHECK_THROWS_AS(ransac_pnp(scene.matches, lookup, scene.query, params), ValidationError);
  params = RansacParams{};
  params.min_inliers = 3;
  CHECK_THROWS_AS(ransac_pnp(scene.matches, lookup, scene.query, params), ValidationError);
  params = RansacParams{};
  params.max_iterations = 0;
  CHECK_THROWS_AS(ransac_pnp(scene.matches, lookup, scene.query, params), ValidationError);
}

}  // TEST_SUITE
