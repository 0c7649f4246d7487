#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hloc/kdtree.hpp"
#include "hloc/map_model.hpp"

namespace hloc {

/// Default output dimension of the global-descriptor PCA.
inline constexpr Eigen::Index kDefaultPcaDim = 512;

/// Linear projector learned from the indexed descriptors. Kept in double
/// precision end to end so the orthonormality and unit-norm guarantees hold
/// to 1e-9 after persistence.
struct PcaProjector {
  Eigen::VectorXd mean;                // input dim
  Eigen::MatrixXd basis;               // input dim x output dim, orthonormal columns
  Eigen::VectorXd explained_variance;  // output dim, nonincreasing

  Eigen::Index input_dim() const { return basis.rows(); }
  Eigen::Index output_dim() const { return basis.cols(); }
};

/// Fits PCA on column-wise samples. Requires at least two samples and
/// 1 <= output_dim <= min(dim, samples-1). Basis columns are the leading
/// eigenvectors of the sample covariance, ordered by descending variance,
/// each signed so that its largest-magnitude entry is positive.
PcaProjector fit_pca(const Eigen::MatrixXd& samples, Eigen::Index output_dim);

/// Projects, centers, and L2-normalizes one descriptor. Throws
/// ValidationError when the input collapses to (near) zero in the retained
/// subspace, i.e. the descriptor equals the training mean there.
Eigen::VectorXd project(const PcaProjector& projector,
                        const Eigen::Ref<const Eigen::VectorXd>& descriptor);

/// Retrieval structure over the map's keyframe global descriptors:
/// projected, normalized, and indexed in a k-d tree keyed by keyframe id.
struct GlobalIndex {
  PcaProjector projector;
  KdTree<double> tree;
};

/// Fits the projector on the map's own keyframes and indexes them.
GlobalIndex build_global_index(const VisualMap& map, Eigen::Index output_dim);

/// Indexes the map under an already-fitted projector (the load path, so a
/// persisted index keeps its exact training result).
GlobalIndex build_global_index(const VisualMap& map, PcaProjector projector);

/// The n keyframes nearest to the query in projected space, nearest first.
/// Exact search; ascending Euclidean distance (equivalently descending
/// cosine similarity, since all vectors are unit norm).
std::vector<std::int64_t> retrieve_priors(const GlobalIndex& index,
                                          const Eigen::Ref<const Eigen::VectorXd>& query_descriptor,
                                          int n);

/// Projector persistence (binary, double precision; bit-exact roundtrip).
void save_projector(const PcaProjector& projector, const std::filesystem::path& path);
PcaProjector load_projector(const std::filesystem::path& path);

}  // namespace hloc
