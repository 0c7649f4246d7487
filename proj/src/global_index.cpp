#include "hloc/global_index.hpp"

#include <Eigen/Eigenvalues>

#include <fstream>

#include "hloc/block_io.hpp"
#include "hloc/errors.hpp"

namespace hloc {

PcaProjector fit_pca(const Eigen::MatrixXd& samples, Eigen::Index output_dim) {
  const Eigen::Index dim = samples.rows();
  const Eigen::Index n = samples.cols();
  if (n < 2) throw ValidationError("pca: need at least 2 samples, got " + std::to_string(n));
  const Eigen::Index max_dim = std::min(dim, n - 1);
  if (output_dim < 1 || output_dim > max_dim)
    throw ValidationError("pca: output dimension " + std::to_string(output_dim) +
                          " out of range [1, " + std::to_string(max_dim) + "]");

  PcaProjector proj;
  proj.mean = samples.rowwise().mean();
  const Eigen::MatrixXd centered = samples.colwise() - proj.mean;
  const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(n - 1);

  // Eigenvalues come out ascending; take the top block in reverse.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw ValidationError("pca: eigendecomposition failed");

  proj.basis.resize(dim, output_dim);
  proj.explained_variance.resize(output_dim);
  for (Eigen::Index i = 0; i < output_dim; ++i) {
    const Eigen::Index src = dim - 1 - i;
    proj.explained_variance[i] = std::max(solver.eigenvalues()[src], 0.0);
    proj.basis.col(i) = solver.eigenvectors().col(src);
    // Deterministic sign: largest-magnitude entry positive.
    Eigen::Index at = 0;
    proj.basis.col(i).cwiseAbs().maxCoeff(&at);
    if (proj.basis(at, i) < 0.0) proj.basis.col(i) = -proj.basis.col(i);
  }
  return proj;
}

Eigen::VectorXd project(const PcaProjector& projector,
                        const Eigen::Ref<const Eigen::VectorXd>& descriptor) {
  if (descriptor.size() != projector.input_dim())
    throw ValidationError("pca: descriptor dimension " + std::to_string(descriptor.size()) +
                          " does not match projector input " +
                          std::to_string(projector.input_dim()));
  Eigen::VectorXd y = projector.basis.transpose() * (descriptor - projector.mean);
  const double norm = y.norm();
  if (norm < 1e-12)
    throw ValidationError("pca: descriptor projects to zero (equals the training mean)");
  return y / norm;
}

GlobalIndex build_global_index(const VisualMap& map, Eigen::Index output_dim) {
  const auto& keyframes = map.keyframes();
  Eigen::MatrixXd samples(map.global_descriptor_dim(),
                          static_cast<Eigen::Index>(keyframes.size()));
  for (Eigen::Index i = 0; i < samples.cols(); ++i)
    samples.col(i) = keyframes[static_cast<std::size_t>(i)].global_descriptor.cast<double>();
  return build_global_index(map, fit_pca(samples, output_dim));
}

GlobalIndex build_global_index(const VisualMap& map, PcaProjector projector) {
  if (projector.input_dim() != map.global_descriptor_dim())
    throw ValidationError("index projector expects descriptors of dimension " +
                          std::to_string(projector.input_dim()) + ", map has " +
                          std::to_string(map.global_descriptor_dim()));
  const auto& keyframes = map.keyframes();
  Eigen::MatrixXd points(projector.output_dim(), static_cast<Eigen::Index>(keyframes.size()));
  std::vector<std::int64_t> ids(keyframes.size());
  for (std::size_t i = 0; i < keyframes.size(); ++i) {
    points.col(static_cast<Eigen::Index>(i)) =
        project(projector, keyframes[i].global_descriptor.cast<double>());
    ids[i] = keyframes[i].id;
  }
  GlobalIndex index{std::move(projector),
                    KdTree<double>::build(points.rows(), points, std::move(ids))};
  return index;
}

std::vector<std::int64_t> retrieve_priors(const GlobalIndex& index,
                                          const Eigen::Ref<const Eigen::VectorXd>& query_descriptor,
                                          int n) {
  if (n < 1) throw ValidationError("retrieval: n must be at least 1");
  const Eigen::VectorXd q = project(index.projector, query_descriptor);
  const auto neighbors = index.tree.knn(q, n);
  std::vector<std::int64_t> ids;
  ids.reserve(neighbors.size());
  for (const auto& nb : neighbors) ids.push_back(nb.id);
  return ids;
}

void save_projector(const PcaProjector& projector, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_block(out, Eigen::MatrixXd(projector.mean));
  write_block(out, projector.basis);
  write_block(out, Eigen::MatrixXd(projector.explained_variance));
  if (!out) throw IoError("failed to write " + path.string());
}

PcaProjector load_projector(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open projector file " + path.string());
  PcaProjector proj;
  const Eigen::MatrixXd mean = read_block_f64(in, "projector mean");
  proj.basis = read_block_f64(in, "projector basis");
  const Eigen::MatrixXd variance = read_block_f64(in, "projector variances");
  if (mean.cols() != 1 || variance.cols() != 1)
    throw ValidationError("projector file " + path.string() + ": malformed vector block");
  proj.mean = mean.col(0);
  proj.explained_variance = variance.col(0);
  if (proj.mean.size() != proj.basis.rows())
    throw ValidationError("projector file " + path.string() + ": mean/basis dimension mismatch");
  if (proj.explained_variance.size() != proj.basis.cols())
    throw ValidationError("projector file " + path.string() + ": variance count mismatch");
  return proj;
}

}  // namespace hloc
