#include "hloc/global_index.hpp"

#include <doctest.h>

#include <Eigen/SVD>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "hloc/block_io.hpp"
#include "hloc/errors.hpp"
#include "hloc/rng.hpp"

using namespace hloc;
namespace fs = std::filesystem;

namespace {

Eigen::MatrixXd random_samples(Rng& rng, Eigen::Index dim, Eigen::Index n) {
  Eigen::MatrixXd m(dim, n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < dim; ++r) m(r, c) = rng.normal();
  return m;
}

// Anisotropic cloud so the spectrum is well separated.
Eigen::MatrixXd stretched_samples(Rng& rng, Eigen::Index dim, Eigen::Index n) {
  Eigen::MatrixXd m = random_samples(rng, dim, n);
  for (Eigen::Index r = 0; r < dim; ++r) m.row(r) *= static_cast<double>(dim - r);
  return m;
}

// A map that only exercises retrieval: keyframes with descriptors, no landmarks.
VisualMap retrieval_map(Rng& rng, Eigen::Index n_kf, Eigen::Index global_dim) {
  std::vector<CameraRecord> cameras{{0, {500.0, 500.0, 320.0, 240.0, 640, 480}}};
  std::vector<Keyframe> keyframes;
  for (Eigen::Index i = 0; i < n_kf; ++i) {
    Keyframe kf;
    kf.id = i;
    kf.camera_id = 0;
    kf.global_descriptor.resize(global_dim);
    for (Eigen::Index d = 0; d < global_dim; ++d)
      kf.global_descriptor[d] = static_cast<float>(rng.normal());
    kf.keypoints.resize(2, 0);
    kf.local_descriptors.resize(4, 0);
    keyframes.push_back(std::move(kf));
  }
  return VisualMap(std::move(cameras), global_dim, 4, std::move(keyframes), {});
}

fs::path temp_file(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "hloc_index_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("global_index") {

TEST_CASE("rank-1 data recovers the generating direction") {
  Eigen::MatrixXd samples(2, 5);
  int c = 0;
  for (double t : {-2.0, -1.0, 0.0, 1.0, 3.0}) samples.col(c++) << t, 2.0 * t;
  const PcaProjector proj = fit_pca(samples, 1);
  const Eigen::Vector2d expected = Eigen::Vector2d(1.0, 2.0).normalized();
  CHECK((proj.basis.col(0) - expected).norm() < 1e-12);
  CHECK(proj.explained_variance[0] > 0.0);
}

TEST_CASE("full-dimensional projection reconstructs exactly") {
  Rng rng(41);
  const Eigen::MatrixXd samples = random_samples(rng, 6, 50);
  const PcaProjector proj = fit_pca(samples, 6);
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    const Eigen::VectorXd x = samples.col(c);
    const Eigen::VectorXd rebuilt =
        proj.mean + proj.basis * (proj.basis.transpose() * (x - proj.mean));
    CHECK((rebuilt - x).norm() < 1e-6);
  }
}

TEST_CASE("basis and variances match an SVD of the centered data") {
  Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index dim = 5, n = 40, keep = 2;
    const Eigen::MatrixXd samples = stretched_samples(rng, dim, n);
    const PcaProjector proj = fit_pca(samples, keep);

    const Eigen::VectorXd mean = samples.rowwise().mean();
    const Eigen::MatrixXd centered = samples.colwise() - mean;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
    for (Eigen::Index i = 0; i < keep; ++i) {
      const double sigma = svd.singularValues()[i];
      CHECK(proj.explained_variance[i] ==
            doctest::Approx(sigma * sigma / static_cast<double>(n - 1)).epsilon(1e-8));
      Eigen::VectorXd u = svd.matrixU().col(i);
      Eigen::Index at = 0;
      u.cwiseAbs().maxCoeff(&at);
      if (u[at] < 0.0) u = -u;
      CHECK((proj.basis.col(i) - u).norm() < 1e-8);
    }
  }
}

TEST_CASE("basis is orthonormal and variances are nonincreasing") {
  Rng rng(43);
  const Eigen::MatrixXd samples = random_samples(rng, 24, 100);
  const PcaProjector proj = fit_pca(samples, 10);
  const Eigen::MatrixXd gram = proj.basis.transpose() * proj.basis;
  CHECK((gram - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-9);
  for (Eigen::Index i = 1; i < 10; ++i)
    CHECK(proj.explained_variance[i] <= proj.explained_variance[i - 1]);
}

TEST_CASE("fit_pca validates its inputs") {
  Rng rng(44);
  const Eigen::MatrixXd samples = random_samples(rng, 4, 10);
  CHECK_THROWS_AS(fit_pca(random_samples(rng, 4, 1), 1), ValidationError);
  CHECK_THROWS_AS(fit_pca(samples, 0), ValidationError);
  CHECK_THROWS_AS(fit_pca(samples, 5), ValidationError);
  // With 3 samples only 2 directions are estimable.
  CHECK_THROWS_AS(fit_pca(random_samples(rng, 4, 3), 3), ValidationError);
}

TEST_CASE("project centers, rotates, and normalizes") {
  Rng rng(45);
  const Eigen::MatrixXd samples = stretched_samples(rng, 8, 60);
  const PcaProjector proj = fit_pca(samples, 3);

  SUBCASE("the mean collapses to zero and is rejected") {
    CHECK_THROWS_AS(project(proj, proj.mean), ValidationError);
  }
  SUBCASE("a pure basis direction maps to a coordinate axis") {
    const Eigen::VectorXd y = project(proj, Eigen::VectorXd(proj.mean + proj.basis.col(0)));
    CHECK((y - Eigen::Vector3d(1, 0, 0)).norm() < 1e-9);
  }
  SUBCASE("outputs are unit vectors") {
    for (int i = 0; i < 20; ++i) {
      Eigen::VectorXd x(8);
      for (int d = 0; d < 8; ++d) x[d] = rng.normal();
      CHECK(project(proj, x).norm() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("dimension mismatch is rejected") {
    CHECK_THROWS_AS(project(proj, Eigen::VectorXd::Zero(9)), ValidationError);
  }
}

TEST_CASE("every keyframe retrieves itself first") {
  Rng rng(46);
  const VisualMap map = retrieval_map(rng, 100, 16);
  const GlobalIndex index = build_global_index(map, 8);
  CHECK(index.tree.size() == 100);
  for (const Keyframe& kf : map.keyframes()) {
    const auto ids = retrieve_priors(index, kf.global_descriptor.cast<double>(), 1);
    REQUIRE(ids.size() == 1);
    CHECK(ids[0] == kf.id);
  }
}

TEST_CASE("retrieval order equals brute-force cosine ranking") {
  Rng rng(47);
  const VisualMap map = retrieval_map(rng, 60, 12);
  const GlobalIndex index = build_global_index(map, 6);

  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd raw(12);
    for (int d = 0; d < 12; ++d) raw[d] = rng.normal();
    const Eigen::VectorXd q = project(index.projector, raw);

    std::vector<std::pair<double, std::int64_t>> oracle;
    for (const Keyframe& kf : map.keyframes()) {
      const Eigen::VectorXd p = project(index.projector, kf.global_descriptor.cast<double>());
      oracle.emplace_back(-p.dot(q), kf.id);  // descending cosine similarity
    }
    std::sort(oracle.begin(), oracle.end());

    const auto got = retrieve_priors(index, raw, 60);
    REQUIRE(got.size() == oracle.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == oracle[i].second);
  }
}

TEST_CASE("retrieval at n is a prefix of retrieval at n+1") {
  Rng rng(48);
  const VisualMap map = retrieval_map(rng, 40, 10);
  const GlobalIndex index = build_global_index(map, 5);
  Eigen::VectorXd raw(10);
  for (int d = 0; d < 10; ++d) raw[d] = rng.normal();
  for (int n = 1; n < 40; ++n) {
    const auto a = retrieve_priors(index, raw, n);
    const auto b = retrieve_priors(index, raw, n + 1);
    REQUIRE(a.size() == static_cast<std::size_t>(n));
    REQUIRE(b.size() == static_cast<std::size_t>(n + 1));
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST_CASE("retrieval input validation") {
  Rng rng(49);
  const VisualMap map = retrieval_map(rng, 10, 8);
  const GlobalIndex index = build_global_index(map, 4);
  Eigen::VectorXd raw = Eigen::VectorXd::Ones(8);
  CHECK_THROWS_AS(retrieve_priors(index, raw, 0), ValidationError);
  CHECK_THROWS_AS(retrieve_priors(index, Eigen::VectorXd::Ones(9), 1), ValidationError);
  // n beyond the map size returns everything.
  CHECK(retrieve_priors(index, raw, 99).size() == 10);
}

TEST_CASE("a stale projector cannot index a mismatched map") {
  Rng rng(50);
  const VisualMap map = retrieval_map(rng, 10, 8);
  PcaProjector proj = build_global_index(map, 4).projector;
  proj.basis.conservativeResize(9, 4);
  CHECK_THROWS_AS(build_global_index(map, std::move(proj)), ValidationError);
}

TEST_CASE("projector persistence is bit-exact") {
  Rng rng(51);
  const Eigen::MatrixXd samples = stretched_samples(rng, 16, 80);
  const PcaProjector proj = fit_pca(samples, 7);
  const fs::path path = temp_file("projector.bin");
  save_projector(proj, path);
  const PcaProjector loaded = load_projector(path);
  CHECK(loaded.mean == proj.mean);
  CHECK(loaded.basis == proj.basis);
  CHECK(loaded.explained_variance == proj.explained_variance);
  const Eigen::MatrixXd gram = loaded.basis.transpose() * loaded.basis;
  CHECK((gram - Eigen::MatrixXd::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("projector load failures") {
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_projector(temp_file("no_such.bin")), IoError);
  }
  SUBCASE("truncated file") {
    Rng rng(52);
    const PcaProjector proj = fit_pca(stretched_samples(rng, 8, 30), 3);
    const fs::path path = temp_file("trunc.bin");
    save_projector(proj, path);
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 16);
    CHECK_THROWS_AS(load_projector(path), IoError);
  }
  SUBCASE("single-precision blocks are rejected") {
    const fs::path path = temp_file("wrongprec.bin");
    std::ofstream out(path, std::ios::binary);
    write_block(out, Eigen::MatrixXf(Eigen::MatrixXf::Ones(4, 1)));
    out.close();
    CHECK_THROWS_AS(load_projector(path), ValidationError);
  }
}

}  // TEST_SUITE
