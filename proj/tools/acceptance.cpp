// Acceptance gate: one self-contained check per release criterion, each
// printing a single PASS/FAIL line. Exit code is the number of failures.
//
// Usage: hloc_acceptance [path-to-hloc-cli]
// The CLI path is needed only by the determinism check (criterion 11).

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hloc/covisibility.hpp"
#include "hloc/errors.hpp"
#include "hloc/eval.hpp"
#include "hloc/geometry.hpp"
#include "hloc/global_index.hpp"
#include "hloc/kdtree.hpp"
#include "hloc/map_model.hpp"
#include "hloc/matching.hpp"
#include "hloc/pipeline.hpp"
#include "hloc/pnp.hpp"
#include "hloc/rng.hpp"
#include "hloc/synth.hpp"

using namespace hloc;

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format(const char* fmt, ...) {
  char buffer[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buffer, sizeof(buffer), fmt, args);
  va_end(args);
  return buffer;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Criteria 1 & 2: ANN exactness and the (1+eps) approximation bound.
// ---------------------------------------------------------------------------

struct AnnInstance {
  Eigen::MatrixXd points;
  std::vector<std::int64_t> ids;
  Eigen::MatrixXd queries;
};

constexpr int kAnnInstances = 50;
constexpr int kAnnQueries = 100;
constexpr std::array<int, 3> kAnnKs = {1, 5, 10};

// Deterministic per index so criteria 1 and 2 see the same instances without
// keeping them all in memory. Duplicated points and query-on-point cases
// force exact distance ties, exercising the id tie rule.
AnnInstance make_ann_instance(int index) {
  Rng rng(5000 + static_cast<std::uint64_t>(index));
  constexpr std::array<int, 3> kDims = {2, 128, 512};
  const int dim = kDims[static_cast<std::size_t>(index) % kDims.size()];
  const int n = 50 + static_cast<int>(rng.uniform_index(1951));  // 50..2000

  AnnInstance inst;
  inst.points.resize(dim, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < dim; ++r) {
      inst.points(r, c) = rng.uniform(-1.0, 1.0);
    }
  }
  for (int c = 1; c < n; ++c) {
    if (rng.uniform() < 0.05) {
      inst.points.col(c) = inst.points.col(static_cast<Eigen::Index>(rng.uniform_index(
          static_cast<std::size_t>(c))));
    }
  }
  inst.ids.resize(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    inst.ids[static_cast<std::size_t>(c)] = c;
  }

  inst.queries.resize(dim, kAnnQueries);
  for (int q = 0; q < kAnnQueries; ++q) {
    if (rng.uniform() < 0.3) {
      inst.queries.col(q) =
          inst.points.col(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(n))));
    } else {
      for (int r = 0; r < dim; ++r) {
        inst.queries(r, q) = rng.uniform(-1.0, 1.0);
      }
    }
  }
  return inst;
}

// Reference answer under the pinned ordering: (squared distance, id).
std::vector<Neighbor<double>> brute_knn(const AnnInstance& inst,
                                        const Eigen::Ref<const Eigen::VectorXd>& query, int k) {
  std::vector<Neighbor<double>> all(static_cast<std::size_t>(inst.points.cols()));
  for (Eigen::Index i = 0; i < inst.points.cols(); ++i) {
    all[static_cast<std::size_t>(i)] = {inst.ids[static_cast<std::size_t>(i)],
                                        (inst.points.col(i) - query).squaredNorm()};
  }
  std::sort(all.begin(), all.end(), [](const Neighbor<double>& a, const Neighbor<double>& b) {
    return a.distance_sq != b.distance_sq ? a.distance_sq < b.distance_sq : a.id < b.id;
  });
  all.resize(static_cast<std::size_t>(std::min<Eigen::Index>(k, inst.points.cols())));
  return all;
}

Outcome check_ann_exactness() {
  const auto start = Clock::now();
  long comparisons = 0;
  for (int i = 0; i < kAnnInstances; ++i) {
    const AnnInstance inst = make_ann_instance(i);
    const auto tree =
        KdTree<double>::build(inst.points.rows(), inst.points, inst.ids);
    for (int q = 0; q < kAnnQueries; ++q) {
      for (int k : kAnnKs) {
        const auto expected = brute_knn(inst, inst.queries.col(q), k);
        const auto got = tree.knn(inst.queries.col(q), k, 0.0);
        if (got.size() != expected.size()) {
          return {false, format("instance %d query %d k=%d: size %zu vs %zu", i, q, k,
                                got.size(), expected.size())};
        }
        for (std::size_t j = 0; j < got.size(); ++j) {
          if (got[j].id != expected[j].id || got[j].distance_sq != expected[j].distance_sq) {
            return {false, format("instance %d query %d k=%d rank %zu: (%lld, %.17g) vs "
                                  "(%lld, %.17g)",
                                  i, q, k, j, static_cast<long long>(got[j].id),
                                  got[j].distance_sq, static_cast<long long>(expected[j].id),
                                  expected[j].distance_sq)};
          }
        }
        ++comparisons;
      }
    }
  }
  const double elapsed = seconds_since(start);
  if (elapsed >= 30.0) {
    return {false, format("took %.1f s (budget 30 s)", elapsed)};
  }
  return {true, format("%ld query/k combinations, %.1f s", comparisons, elapsed)};
}

Outcome check_ann_bound() {
  constexpr std::array<double, 3> kEpsilons = {0.5, 3.0, 9.0};
  long checked = 0;
  for (int i = 0; i < kAnnInstances; ++i) {
    const AnnInstance inst = make_ann_instance(i);
    const auto tree =
        KdTree<double>::build(inst.points.rows(), inst.points, inst.ids);
    for (int q = 0; q < kAnnQueries; ++q) {
      for (int k : kAnnKs) {
        const auto exact = brute_knn(inst, inst.queries.col(q), k);
        for (double eps : kEpsilons) {
          const auto got = tree.knn(inst.queries.col(q), k, eps);
          if (got.size() != exact.size()) {
            return {false, format("instance %d query %d k=%d eps=%g: size mismatch", i, q, k,
                                  eps)};
          }
          const double scale = (1.0 + eps) * (1.0 + eps);
          for (std::size_t j = 0; j < got.size(); ++j) {
            if (got[j].distance_sq > scale * exact[j].distance_sq) {
              return {false,
                      format("instance %d query %d k=%d eps=%g rank %zu: %.17g > %.17g", i, q,
                             k, eps, j, got[j].distance_sq, scale * exact[j].distance_sq)};
            }
            ++checked;
          }
        }
      }
    }
  }
  return {true, format("%ld returned distances within bound", checked)};
}

// ---------------------------------------------------------------------------
// Criterion 3: PCA against a dense eigendecomposition oracle.
// ---------------------------------------------------------------------------

Outcome check_pca_oracle() {
  double worst_basis = 0.0;
  double worst_var = 0.0;
  double worst_ortho = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(6000 + static_cast<std::uint64_t>(trial));
    const int dim = 4 + 3 * trial;  // 4..61
    const int n = 3 * dim + static_cast<int>(rng.uniform_index(200));

    // Well-separated spectrum so eigenvectors are numerically stable.
    Eigen::MatrixXd mixing(dim, dim);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) {
        mixing(r, c) = rng.normal();
      }
    }
    const Eigen::MatrixXd q_rot =
        Eigen::HouseholderQR<Eigen::MatrixXd>(mixing).householderQ();
    Eigen::VectorXd scales(dim);
    for (int r = 0; r < dim; ++r) {
      scales[r] = std::pow(0.85, r);
    }
    Eigen::VectorXd offset(dim);
    for (int r = 0; r < dim; ++r) {
      offset[r] = rng.uniform(-2.0, 2.0);
    }
    Eigen::MatrixXd samples(dim, n);
    for (int c = 0; c < n; ++c) {
      Eigen::VectorXd z(dim);
      for (int r = 0; r < dim; ++r) {
        z[r] = rng.normal();
      }
      samples.col(c) = q_rot * scales.asDiagonal() * z + offset;
    }

    const Eigen::Index out_dim =
        1 + static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(dim)));
    const PcaProjector fitted = fit_pca(samples, out_dim);

    // Independent recount: explicit covariance, dense eigendecomposition,
    // the same descending order and sign convention.
    const Eigen::VectorXd mean = samples.rowwise().sum() / static_cast<double>(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (int c = 0; c < n; ++c) {
      const Eigen::VectorXd centered = samples.col(c) - mean;
      cov += centered * centered.transpose();
    }
    cov /= static_cast<double>(n - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    for (Eigen::Index j = 0; j < out_dim; ++j) {
      const Eigen::Index src = dim - 1 - j;
      Eigen::VectorXd expected = solver.eigenvectors().col(src);
      Eigen::Index at = 0;
      expected.cwiseAbs().maxCoeff(&at);
      if (expected[at] < 0.0) {
        expected = -expected;
      }
      worst_basis = std::max(worst_basis, (fitted.basis.col(j) - expected).cwiseAbs().maxCoeff());
      worst_var = std::max(worst_var,
                           std::abs(fitted.explained_variance[j] - solver.eigenvalues()[src]));
    }

    const Eigen::MatrixXd gram = fitted.basis.transpose() * fitted.basis;
    worst_ortho = std::max(
        worst_ortho,
        (gram - Eigen::MatrixXd::Identity(out_dim, out_dim)).cwiseAbs().maxCoeff());
  }
  const bool pass = worst_basis < 1e-8 && worst_var < 1e-8 && worst_ortho < 1e-9;
  return {pass, format("max basis diff %.2e, var diff %.2e, orthonormality %.2e", worst_basis,
                       worst_var, worst_ortho)};
}

// ---------------------------------------------------------------------------
// Criterion 4: covisibility clustering against a BFS oracle.
// ---------------------------------------------------------------------------

struct GraphInstance {
  VisualMap map;
  std::vector<std::int64_t> priors;
};

GraphInstance make_graph_instance(Rng& rng) {
  const int num_frames = 1 + static_cast<int>(rng.uniform_index(50));
  const int num_landmarks = 1 + static_cast<int>(rng.uniform_index(500));
  const PinholeCamera camera{100.0, 100.0, 50.0, 50.0, 100, 100};

  std::vector<std::vector<std::int64_t>> frame_landmarks(
      static_cast<std::size_t>(num_frames));
  std::vector<Landmark> landmarks;
  for (int lm = 0; lm < num_landmarks; ++lm) {
    const int degree = 1 + static_cast<int>(rng.uniform_index(3));
    std::set<int> observers;
    while (static_cast<int>(observers.size()) < std::min(degree, num_frames)) {
      observers.insert(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(num_frames))));
    }
    Landmark landmark;
    landmark.id = lm;
    landmark.position = Eigen::Vector3d(0.0, 0.0, 1.0);
    for (int frame : observers) {
      const auto slot =
          static_cast<Eigen::Index>(frame_landmarks[static_cast<std::size_t>(frame)].size());
      landmark.observations.push_back({frame, slot});
      frame_landmarks[static_cast<std::size_t>(frame)].push_back(lm);
    }
    landmarks.push_back(std::move(landmark));
  }

  std::vector<Keyframe> keyframes;
  for (int frame = 0; frame < num_frames; ++frame) {
    Keyframe kf;
    kf.id = frame;
    kf.camera_id = 0;
    kf.pose.rotation = Eigen::Quaterniond::Identity();
    kf.pose.translation = Eigen::Vector3d::Zero();
    kf.global_descriptor = Eigen::VectorXf::Ones(4);
    const auto count =
        static_cast<Eigen::Index>(frame_landmarks[static_cast<std::size_t>(frame)].size());
    kf.keypoints = Eigen::Matrix2Xd::Constant(2, count, 50.0);
    kf.local_descriptors = Eigen::MatrixXf::Zero(4, count);
    keyframes.push_back(std::move(kf));
  }

  GraphInstance inst{VisualMap({{0, camera}}, 4, 4, std::move(keyframes), std::move(landmarks)),
                     {}};

  const int prior_count = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(num_frames)));
  std::vector<std::int64_t> pool(static_cast<std::size_t>(num_frames));
  for (int frame = 0; frame < num_frames; ++frame) {
    pool[static_cast<std::size_t>(frame)] = frame;
  }
  for (std::size_t i = pool.size(); i > 1; --i) {
    std::swap(pool[i - 1], pool[rng.uniform_index(i)]);
  }
  pool.resize(static_cast<std::size_t>(prior_count));
  inst.priors = std::move(pool);
  return inst;
}

// Straightforward BFS over "priors sharing a landmark", then the pinned
// ordering: descending size, ties by smallest member id.
std::vector<Place> bfs_oracle(const VisualMap& map, const std::vector<std::int64_t>& priors) {
  std::set<std::int64_t> prior_set(priors.begin(), priors.end());
  std::map<std::int64_t, std::set<std::int64_t>> frame_lms;
  std::map<std::int64_t, std::set<std::int64_t>> lm_frames;
  for (std::int64_t frame : prior_set) {
    for (std::int64_t lm : map.observed_landmarks(frame)) {
      frame_lms[frame].insert(lm);
      lm_frames[lm].insert(frame);
    }
  }

  std::set<std::int64_t> seen;
  std::vector<Place> places;
  for (std::int64_t seed_frame : prior_set) {
    if (seen.count(seed_frame) > 0) {
      continue;
    }
    std::set<std::int64_t> component;
    std::set<std::int64_t> component_lms;
    std::vector<std::int64_t> queue{seed_frame};
    seen.insert(seed_frame);
    while (!queue.empty()) {
      const std::int64_t frame = queue.back();
      queue.pop_back();
      component.insert(frame);
      for (std::int64_t lm : frame_lms[frame]) {
        component_lms.insert(lm);
        for (std::int64_t other : lm_frames[lm]) {
          if (seen.insert(other).second) {
            queue.push_back(other);
          }
        }
      }
    }
    Place place;
    place.keyframe_ids.assign(component.begin(), component.end());
    place.landmark_ids.assign(component_lms.begin(), component_lms.end());
    places.push_back(std::move(place));
  }

  std::stable_sort(places.begin(), places.end(), [](const Place& a, const Place& b) {
    if (a.keyframe_ids.size() != b.keyframe_ids.size()) {
      return a.keyframe_ids.size() > b.keyframe_ids.size();
    }
    return a.keyframe_ids.front() < b.keyframe_ids.front();
  });
  for (std::size_t i = 0; i < places.size(); ++i) {
    places[i].rank = static_cast<int>(i);
  }
  return places;
}

Outcome check_covisibility_oracle() {
  Rng rng(7000);
  for (int trial = 0; trial < 500; ++trial) {
    const GraphInstance inst = make_graph_instance(rng);
    const std::vector<Place> got = cluster_priors(inst.map, inst.priors);
    const std::vector<Place> expected = bfs_oracle(inst.map, inst.priors);
    if (got.size() != expected.size()) {
      return {false, format("trial %d: %zu places vs %zu", trial, got.size(), expected.size())};
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].keyframe_ids != expected[i].keyframe_ids ||
          got[i].landmark_ids != expected[i].landmark_ids ||
          got[i].rank != expected[i].rank) {
        return {false, format("trial %d: place %zu differs from oracle", trial, i)};
      }
    }
  }

  // The five-frame, two-component scenario: frames {0,1,2} chained through
  // shared landmarks, frames {3,4} sharing another; the larger component
  // must come out first regardless of prior order.
  const PinholeCamera camera{100.0, 100.0, 50.0, 50.0, 100, 100};
  std::vector<Keyframe> keyframes;
  for (int frame = 0; frame < 5; ++frame) {
    Keyframe kf;
    kf.id = frame;
    kf.camera_id = 0;
    kf.pose.rotation = Eigen::Quaterniond::Identity();
    kf.pose.translation = Eigen::Vector3d::Zero();
    kf.global_descriptor = Eigen::VectorXf::Ones(4);
    kf.keypoints = Eigen::Matrix2Xd::Constant(2, 2, 50.0);
    kf.local_descriptors = Eigen::MatrixXf::Zero(4, 2);
    keyframes.push_back(std::move(kf));
  }
  std::vector<Landmark> landmarks;
  landmarks.push_back({0, {0, 0, 1}, {{0, 0}, {1, 0}}});
  landmarks.push_back({1, {0, 0, 1}, {{1, 1}, {2, 0}}});
  landmarks.push_back({2, {0, 0, 1}, {{3, 0}, {4, 0}}});
  const VisualMap map({{0, camera}}, 4, 4, std::move(keyframes), std::move(landmarks));
  const std::vector<std::int64_t> priors{4, 2, 0, 3, 1};
  const std::vector<Place> places = cluster_priors(map, priors);
  const bool scenario =
      places.size() == 2 && places[0].keyframe_ids == std::vector<std::int64_t>{0, 1, 2} &&
      places[1].keyframe_ids == std::vector<std::int64_t>{3, 4} && places[0].rank == 0 &&
      places[1].rank == 1;
  if (!scenario) {
    return {false, "five-frame scenario: unexpected partition or order"};
  }
  return {true, "500 random graphs plus the five-frame scenario"};
}

// ---------------------------------------------------------------------------
// Criteria 5-7: P3P roundtrip, RANSAC robustness, Jacobian check.
// ---------------------------------------------------------------------------

const PinholeCamera kBenchCamera{500.0, 500.0, 320.0, 240.0, 640, 480};

Pose random_pose(Rng& rng, double rotation_scale, double translation_scale) {
  Pose pose;
  const Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
  pose.rotation = quaternion_exp(axis * rotation_scale);
  pose.translation = Eigen::Vector3d(rng.uniform(-translation_scale, translation_scale),
                                     rng.uniform(-translation_scale, translation_scale),
                                     rng.uniform(-translation_scale, translation_scale));
  return pose;
}

Eigen::Vector2d random_pixel(Rng& rng) {
  return {rng.uniform(10.0, 630.0), rng.uniform(10.0, 470.0)};
}

// World point that projects to `px` at a random depth under `pose`.
Eigen::Vector3d backproject(Rng& rng, const Pose& pose, const Eigen::Vector2d& px) {
  const double depth = rng.uniform(2.0, 8.0);
  const Eigen::Vector3d ray((px.x() - kBenchCamera.cx) / kBenchCamera.fx,
                            (px.y() - kBenchCamera.cy) / kBenchCamera.fy, 1.0);
  return inverse(pose).rotation * (ray * depth) + inverse(pose).translation;
}

double rotation_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const Eigen::Quaterniond rel = a.conjugate() * b;
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

Outcome check_p3p_roundtrip() {
  const auto start = Clock::now();
  Rng rng(8000);
  for (int trial = 0; trial < 10000; ++trial) {
    const Pose gt = random_pose(rng, 1.0, 2.0);
    std::array<Eigen::Vector2d, 3> pixels;
    while (true) {
      for (auto& px : pixels) {
        px = random_pixel(rng);
      }
      const double area = std::abs((pixels[1] - pixels[0]).x() * (pixels[2] - pixels[0]).y() -
                                   (pixels[1] - pixels[0]).y() * (pixels[2] - pixels[0]).x());
      if (area > 500.0) {
        break;  // comfortably away from the solver's degeneracy guards
      }
    }
    std::array<Eigen::Vector3d, 3> bearings;
    std::array<Eigen::Vector3d, 3> points;
    for (int i = 0; i < 3; ++i) {
      points[i] = backproject(rng, gt, pixels[i]);
      bearings[i] = Eigen::Vector3d((pixels[i].x() - kBenchCamera.cx) / kBenchCamera.fx,
                                    (pixels[i].y() - kBenchCamera.cy) / kBenchCamera.fy, 1.0)
                        .normalized();
    }
    const std::vector<Pose> solutions = solve_p3p(bearings, points);
    bool found = false;
    for (const Pose& sol : solutions) {
      if (rotation_angle(sol.rotation, gt.rotation) <= 1e-6 &&
          (sol.translation - gt.translation).norm() <= 1e-6) {
        found = true;
        break;
      }
    }
    if (!found) {
      return {false, format("trial %d: no solution within 1e-6 (%zu candidates)", trial,
                            solutions.size())};
    }
  }

  // Degenerate inputs must be rejected, not silently solved.
  const std::array<Eigen::Vector3d, 3> ok_bearings = {
      Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0.1, 0, 1).normalized(),
      Eigen::Vector3d(0, 0.1, 1).normalized()};
  int rejections = 0;
  try {
    solve_p3p(ok_bearings, {Eigen::Vector3d(0, 0, 5), Eigen::Vector3d(1, 1, 5),
                            Eigen::Vector3d(2, 2, 5)});  // collinear points
  } catch (const ValidationError&) {
    ++rejections;
  }
  try {
    solve_p3p(ok_bearings, {Eigen::Vector3d(0, 0, 5), Eigen::Vector3d(0, 0, 5),
                            Eigen::Vector3d(0, 1, 5)});  // coincident points
  } catch (const ValidationError&) {
    ++rejections;
  }
  try {
    solve_p3p({Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 1, 1)},
              {Eigen::Vector3d(0, 0, 5), Eigen::Vector3d(1, 0, 5), Eigen::Vector3d(0, 1, 5)});
  } catch (const ValidationError&) {
    ++rejections;  // coincident bearings
  }
  if (rejections != 3) {
    return {false, format("only %d of 3 degenerate inputs rejected", rejections)};
  }

  const double elapsed = seconds_since(start);
  if (elapsed >= 10.0) {
    return {false, format("took %.1f s (budget 10 s)", elapsed)};
  }
  return {true, format("10000 roundtrips, 3 rejections, %.1f s", elapsed)};
}

Outcome check_ransac_robustness() {
  constexpr int kMatches = 200;
  constexpr int kOutliers = 100;
  int successes = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(9000 + static_cast<std::uint64_t>(trial));
    const Pose gt = random_pose(rng, 1.0, 2.0);

    QueryFrame query;
    query.camera = kBenchCamera;
    query.keypoints.resize(2, kMatches);
    std::vector<Eigen::Vector3d> positions;
    std::vector<Match2D3D> matches;
    for (int i = 0; i < kMatches; ++i) {
      const Eigen::Vector2d true_px = random_pixel(rng);
      positions.push_back(backproject(rng, gt, true_px));
      Eigen::Vector2d px;
      if (i < kMatches - kOutliers) {
        px = true_px + Eigen::Vector2d(rng.normal() * 0.5, rng.normal() * 0.5);
      } else {
        do {
          px = random_pixel(rng);
        } while ((px - true_px).norm() < 50.0);
      }
      query.keypoints.col(i) = px;
      matches.push_back({i, i, 0.0f});
    }

    RansacParams params;  // defaults; only the seed varies per trial
    params.rng_seed = 9000 + static_cast<std::uint64_t>(trial);
    const PnpOutcome outcome = ransac_pnp(
        matches, [&](std::int64_t id) { return positions[static_cast<std::size_t>(id)]; },
        query, params);
    if (!outcome.estimate) {
      continue;
    }
    const double error = pose_error(outcome.estimate->pose, gt).position_m;
    const auto inliers = static_cast<int>(outcome.estimate->inlier_matches.size());
    if (error < 0.01 && inliers >= kMatches / 10) {
      ++successes;
    }
  }
  return {successes >= 99, format("%d/100 trials within 0.01 m with enough inliers", successes)};
}

Outcome check_jacobian() {
  double worst = 0.0;
  Rng rng(10000);
  for (int trial = 0; trial < 100; ++trial) {
    const Pose pose = random_pose(rng, 1.0, 2.0);
    const Eigen::Vector2d px = random_pixel(rng);
    const Eigen::Vector3d point = backproject(rng, pose, px);
    const Eigen::Vector2d observed = random_pixel(rng);

    const Eigen::Matrix<double, 2, 6> analytic = reprojection_jacobian(kBenchCamera, pose, point);
    Eigen::Matrix<double, 2, 6> numeric;
    const double h = 1e-6;
    for (int j = 0; j < 6; ++j) {
      Eigen::Matrix<double, 6, 1> delta = Eigen::Matrix<double, 6, 1>::Zero();
      delta[j] = h;
      const Eigen::Vector2d plus =
          reprojection_residual(kBenchCamera, apply_increment(pose, delta), point, observed);
      delta[j] = -h;
      const Eigen::Vector2d minus =
          reprojection_residual(kBenchCamera, apply_increment(pose, delta), point, observed);
      numeric.col(j) = (plus - minus) / (2.0 * h);
    }
    const double scale = std::max(1.0, analytic.cwiseAbs().maxCoeff());
    worst = std::max(worst, (analytic - numeric).cwiseAbs().maxCoeff() / scale);
  }
  return {worst < 1e-5, format("max relative error %.2e", worst)};
}

// ---------------------------------------------------------------------------
// Criteria 8-10: the synthetic benchmark.
// ---------------------------------------------------------------------------

struct BenchmarkRun {
  EvalReport report;
  double matching_ms = 0.0;  // summed over queries
};

struct Benchmark {
  SynthWorld world;
  GlobalIndex index;
  std::vector<Pose> gt;
};

SynthConfig benchmark_config() {
  SynthConfig config;
  config.rng_seed = 11000;
  config.num_places = 10;
  config.keyframes_per_place = 20;
  config.landmarks_per_place = 2000;
  config.queries_per_place = 50;
  config.query_keypoints = 150;
  config.aliasing_pairs = {{0, 5}, {2, 7}};
  config.shared_vocabulary_size = 40000;
  config.keypoint_noise_px = 0.5;
  config.local_descriptor_noise_sigma = 0.05;
  // Keeps retrieval arc-local (the within-place descriptor arc has a small
  // amplitude); the aliased twins stay indistinguishable regardless, since
  // they share prototypes exactly.
  config.global_descriptor_noise_sigma = 0.02;
  return config;
}

Benchmark& benchmark() {
  static Benchmark bench = [] {
    Benchmark b{generate_world(benchmark_config()), {}, {}};
    b.index = build_global_index(b.world.map, 16);
    for (const QueryFrame& q : b.world.queries) {
      b.gt.push_back(*q.gt_pose);
    }
    return b;
  }();
  return bench;
}

BenchmarkRun run_benchmark(const PipelineParams& params) {
  Benchmark& b = benchmark();
  const std::vector<LocalizationResult> results =
      localize_batch(b.index, b.world.map, b.world.queries, params);
  BenchmarkRun run;
  run.report = localization_metrics(results, b.gt, EvalParams{});
  for (const LocalizationResult& r : results) {
    const auto it = r.stage_timings.find(kStageMatching);
    if (it != r.stage_timings.end()) {
      run.matching_ms += it->second;
    }
  }
  return run;
}

std::map<std::string, BenchmarkRun>& benchmark_runs() {
  static std::map<std::string, BenchmarkRun> runs;
  return runs;
}

Outcome check_mode_comparison() {
  const auto start = Clock::now();
  PipelineParams params;
  benchmark_runs()["hier_n10"] = run_benchmark(params);
  params.mode = PipelineMode::kDirect;
  benchmark_runs()["direct"] = run_benchmark(params);

  const EvalReport& hier = benchmark_runs()["hier_n10"].report;
  const EvalReport& direct = benchmark_runs()["direct"].report;
  const double elapsed = seconds_since(start);

  const bool recall_ok = hier.recall_at_threshold >= 1.25 * direct.recall_at_threshold &&
                         direct.recall_at_threshold > 0.0;
  const bool median_ok = hier.median_error_m < direct.median_error_m;
  const bool time_ok = elapsed < 300.0;
  return {recall_ok && median_ok && time_ok,
          format("recall %.3f vs %.3f (%.2fx), median %.4f vs %.4f m, %.0f s",
                 hier.recall_at_threshold, direct.recall_at_threshold,
                 direct.recall_at_threshold > 0.0
                     ? hier.recall_at_threshold / direct.recall_at_threshold
                     : 0.0,
                 hier.median_error_m, direct.median_error_m, elapsed)};
}

Outcome check_places_evaluated() {
  if (benchmark_runs().count("hier_n10") == 0) {
    benchmark_runs()["hier_n10"] = run_benchmark(PipelineParams{});
  }
  const EvalReport& report = benchmark_runs()["hier_n10"].report;
  const bool pass = report.mean_places_evaluated < report.mean_places_retrieved &&
                    report.mean_places_evaluated < 2.0;
  return {pass, format("mean evaluated %.2f vs retrieved %.2f", report.mean_places_evaluated,
                       report.mean_places_retrieved)};
}

Outcome check_tradeoff_sweeps() {
  // N sweep on the benchmark: recall stays flat, matching time grows.
  if (benchmark_runs().count("hier_n10") == 0) {
    benchmark_runs()["hier_n10"] = run_benchmark(PipelineParams{});
  }
  PipelineParams params;
  params.num_priors = 5;
  benchmark_runs()["hier_n5"] = run_benchmark(params);
  params.num_priors = 20;
  benchmark_runs()["hier_n20"] = run_benchmark(params);

  const BenchmarkRun& n5 = benchmark_runs()["hier_n5"];
  const BenchmarkRun& n10 = benchmark_runs()["hier_n10"];
  const BenchmarkRun& n20 = benchmark_runs()["hier_n20"];
  const double recall_spread =
      std::max({n5.report.recall_at_threshold, n10.report.recall_at_threshold,
                n20.report.recall_at_threshold}) -
      std::min({n5.report.recall_at_threshold, n10.report.recall_at_threshold,
                n20.report.recall_at_threshold});
  const bool n_ok = recall_spread < 0.03 && n5.matching_ms < n10.matching_ms &&
                    n10.matching_ms < n20.matching_ms;

  // Epsilon sweep on a harder, match-starved world where sloppier search
  // visibly costs matches: time must drop and recall must drop with eps.
  SynthConfig config;
  config.rng_seed = 12000;
  config.num_places = 6;
  config.keyframes_per_place = 15;
  config.landmarks_per_place = 800;
  config.queries_per_place = 40;
  config.query_keypoints = 26;
  config.local_descriptor_noise_sigma = 0.09;
  config.global_descriptor_noise_sigma = 0.05;
  config.keypoint_noise_px = 0.5;
  const SynthWorld world = generate_world(config);
  const GlobalIndex index = build_global_index(world.map, 16);
  std::vector<Pose> gt;
  for (const QueryFrame& q : world.queries) {
    gt.push_back(*q.gt_pose);
  }

  std::map<double, std::pair<double, double>> eps_runs;  // eps -> (recall, match ms)
  for (double eps : {0.5, 3.0, 9.0}) {
    PipelineParams sweep;
    sweep.match.epsilon = eps;
    const std::vector<LocalizationResult> results =
        localize_batch(index, world.map, world.queries, sweep);
    const EvalReport report = localization_metrics(results, gt, EvalParams{});
    double matching = 0.0;
    for (const LocalizationResult& r : results) {
      const auto it = r.stage_timings.find(kStageMatching);
      if (it != r.stage_timings.end()) {
        matching += it->second;
      }
    }
    eps_runs[eps] = {report.recall_at_threshold, matching};
  }
  const bool eps_ok = eps_runs[9.0].second < eps_runs[0.5].second &&
                      eps_runs[9.0].first < eps_runs[0.5].first;

  return {n_ok && eps_ok,
          format("N recall %.3f/%.3f/%.3f, match ms %.0f/%.0f/%.0f; eps recall %.3f->%.3f, "
                 "ms %.0f->%.0f",
                 n5.report.recall_at_threshold, n10.report.recall_at_threshold,
                 n20.report.recall_at_threshold, n5.matching_ms, n10.matching_ms,
                 n20.matching_ms, eps_runs[0.5].first, eps_runs[9.0].first,
                 eps_runs[0.5].second, eps_runs[9.0].second)};
}

// ---------------------------------------------------------------------------
// Criterion 11: end-to-end determinism through the real binary.
// ---------------------------------------------------------------------------

std::string sh_quote(const fs::path& path) { return "\"" + path.string() + "\""; }

std::optional<std::string> file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return std::nullopt;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome check_determinism(const std::string& cli_path) {
  if (cli_path.empty()) {
    return {false, "pass the hloc binary path as argv[1]"};
  }
  const fs::path dir = fs::temp_directory_path() / "hloc_acceptance" / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const auto shell = [](const std::string& command) {
    return std::system(command.c_str()) == 0;
  };
  const std::string cli = sh_quote(cli_path);
  const std::string quiet = " > /dev/null 2>&1";

  if (!shell(cli + " synth --out-dir " + sh_quote(dir) +
             " --places 4 --keyframes-per-place 8 --landmarks-per-place 300"
             " --queries-per-place 10 --query-keypoints 60 --global-dim 32 --local-dim 32"
             " --alias 0 2" +
             quiet)) {
    return {false, "synth failed"};
  }
  if (!shell(cli + " index --map " + sh_quote(dir / "map.json") + " --out " +
             sh_quote(dir / "index.bin") + " --pca-dim 8" + quiet)) {
    return {false, "index failed"};
  }

  const std::array<std::pair<const char*, const char*>, 3> runs = {
      {{"run_a", "1"}, {"run_b", "1"}, {"run_c", "4"}}};
  for (const auto& [name, threads] : runs) {
    const fs::path results = dir / (std::string(name) + ".jsonl");
    const fs::path csv_dir = dir / name;
    if (!shell("HLOC_THREADS=" + std::string(threads) + " " + cli + " localize --map " +
               sh_quote(dir / "map.json") + " --index " + sh_quote(dir / "index.bin") +
               " --queries " + sh_quote(dir / "queries.json") + " --out " + sh_quote(results) +
               quiet)) {
      return {false, format("localize failed (%s)", name)};
    }
    if (!shell(cli + " eval --results " + sh_quote(results) + " --queries " +
               sh_quote(dir / "queries.json") + " --out-dir " + sh_quote(csv_dir) + " --map " +
               sh_quote(dir / "map.json") + " --index " + sh_quote(dir / "index.bin") + quiet)) {
      return {false, format("eval failed (%s)", name)};
    }
  }

  // timings.csv is measured wall time and legitimately differs; everything
  // else must be byte-identical across executions and thread counts.
  for (const char* file :
       {"metrics.csv", "stats.csv", "cumulative_errors.csv", "recall_at_n.csv"}) {
    const auto a = file_bytes(dir / "run_a" / file);
    const auto b = file_bytes(dir / "run_b" / file);
    const auto c = file_bytes(dir / "run_c" / file);
    if (!a || !b || !c) {
      return {false, format("%s missing from a run", file)};
    }
    if (*a != *b) {
      return {false, format("%s differs across identical executions", file)};
    }
    if (*a != *c) {
      return {false, format("%s differs across thread counts", file)};
    }
  }
  return {true, "metrics identical across reruns and HLOC_THREADS={1,4}"};
}

// ---------------------------------------------------------------------------
// Criterion 12: binary map format stability.
// ---------------------------------------------------------------------------

Outcome check_format_stability() {
  const fs::path dir = fs::temp_directory_path() / "hloc_acceptance" / "format";
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (int i = 0; i < 10; ++i) {
    SynthConfig config;
    config.rng_seed = 13000 + static_cast<std::uint64_t>(i);
    config.num_places = 1 + i % 4;
    config.keyframes_per_place = 3 + i;
    config.landmarks_per_place = 50 + 30 * i;
    config.queries_per_place = 1;
    config.query_keypoints = 10;
    config.global_descriptor_dim = 16;
    config.local_descriptor_dim = 24;
    const SynthWorld world = generate_world(config);

    const fs::path path = dir / "map.json";
    save_map(world.map, path);
    const auto json_first = file_bytes(path);
    const auto bin_first = file_bytes(dir / "map.bin");

    const VisualMap loaded = load_map(path);
    save_map(loaded, path);
    const auto json_second = file_bytes(path);
    const auto bin_second = file_bytes(dir / "map.bin");

    if (!json_first || !bin_first || !json_second || !bin_second) {
      return {false, format("map %d: missing output files", i)};
    }
    if (*json_first != *json_second || *bin_first != *bin_second) {
      return {false, format("map %d: save/load/save changed the bytes", i)};
    }
  }
  return {true, "10 maps roundtripped byte-identically"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli_path = argc > 1 ? argv[1] : "";

  struct Check {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Check> checks = {
      {1, "ANN exactness", check_ann_exactness},
      {2, "ANN approximation bound", check_ann_bound},
      {3, "PCA oracle", check_pca_oracle},
      {4, "Covisibility oracle", check_covisibility_oracle},
      {5, "P3P roundtrip", check_p3p_roundtrip},
      {6, "RANSAC robustness", check_ransac_robustness},
      {7, "Refinement gradient check", check_jacobian},
      {8, "Hierarchical vs direct", check_mode_comparison},
      {9, "Places evaluated vs retrieved", check_places_evaluated},
      {10, "N and epsilon trade-offs", check_tradeoff_sweeps},
      {11, "End-to-end determinism", [&] { return check_determinism(cli_path); }},
      {12, "Map format stability", check_format_stability},
  };

  int failures = 0;
  for (const Check& check : checks) {
    const auto start = Clock::now();
    Outcome outcome;
    try {
      outcome = check.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    if (!outcome.pass) {
      ++failures;
    }
    std::printf("%2d. %-32s %s (%.1f s)%s%s\n", check.id, check.name,
                outcome.pass ? "PASS" : "FAIL", seconds_since(start),
                outcome.detail.empty() ? "" : " — ", outcome.detail.c_str());
    std::fflush(stdout);
  }

  if (failures == 0) {
    std::printf("All 12 acceptance checks passed.\n");
  } else {
    std::printf("%d acceptance check(s) failed.\n", failures);
  }
  return failures;
}
