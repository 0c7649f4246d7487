#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "hloc/errors.hpp"

namespace hloc {

/// One k-NN hit: payload id and squared Euclidean distance.
template <typename Scalar>
struct Neighbor {
  std::int64_t id = 0;
  Scalar distance_sq = 0;
};

/// k-d tree over fixed-dimension vectors with exact and (1+eps)-approximate
/// k-nearest-neighbor search.
///
/// Contract notes, pinned because approximate-NN semantics vary by library:
///  - Results are sorted by squared distance, ties broken by ascending id.
///    With epsilon = 0 the result is identical to brute force under that
///    ordering.
///  - With epsilon > 0, a subtree is pruned when its lower-bound distance
///    exceeds current-best / (1 + eps); every returned squared distance d_i
///    then satisfies d_i <= (1+eps)^2 * d_i* against the true i-th neighbor.
///  - Construction: median split on the dimension of maximum spread,
///    leaf size 8. Deterministic for identical input order.
template <typename Scalar>
class KdTree {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Result = std::vector<Neighbor<Scalar>>;

  KdTree() = default;

  /// Builds from a dim x n matrix (one point per column) and per-column ids.
  static KdTree build(Eigen::Index dimension, const Matrix& points,
                      std::vector<std::int64_t> ids) {
    if (dimension <= 0) throw ValidationError("kdtree: dimension must be positive");
    if (points.cols() != static_cast<Eigen::Index>(ids.size()))
      throw ValidationError("kdtree: id count does not match point count");
    if (points.cols() > 0 && points.rows() != dimension)
      throw ValidationError("kdtree: point dimension mismatch");
    {
      std::vector<std::int64_t> sorted = ids;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ValidationError("kdtree: duplicate payload id");
    }

    KdTree tree;
    tree.dim_ = dimension;
    const Eigen::Index n = points.cols();
    if (n == 0) {
      tree.points_.resize(dimension, 0);
      return tree;
    }

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    tree.nodes_.reserve(static_cast<std::size_t>(2 * n / kLeafSize + 2));
    build_recursive(points, ids, order, 0, n, tree);

    // Materialize points in tree order so leaf scans are contiguous.
    tree.points_.resize(dimension, n);
    tree.ids_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      tree.points_.col(i) = points.col(order[i]);
      tree.ids_[i] = ids[order[i]];
    }
    return tree;
  }

  /// Convenience builder from (id, vector) pairs.
  static KdTree build(Eigen::Index dimension,
                      const std::vector<std::pair<std::int64_t, Vector>>& entries) {
    Matrix points(dimension, static_cast<Eigen::Index>(entries.size()));
    std::vector<std::int64_t> ids(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].second.size() != dimension)
        throw ValidationError("kdtree: point dimension mismatch");
      points.col(static_cast<Eigen::Index>(i)) = entries[i].second;
      ids[i] = entries[i].first;
    }
    return build(dimension, points, std::move(ids));
  }

  Eigen::Index dimension() const { return dim_; }
  Eigen::Index size() const { return points_.cols(); }

  /// k nearest neighbors of `query`. epsilon = 0 searches exactly.
  Result knn(const Eigen::Ref<const Vector>& query, int k, double epsilon = 0.0) const {
    if (k < 1) throw ValidationError("kdtree: k must be >= 1");
    if (epsilon < 0.0) throw ValidationError("kdtree: epsilon must be >= 0");
    if (query.size() != dim_) throw ValidationError("kdtree: query dimension mismatch");
    if (size() == 0) return {};

    SearchState state;
    state.query = &query;
    state.k = static_cast<std::size_t>(std::min<Eigen::Index>(k, size()));
    state.prune_scale = (1.0 + epsilon) * (1.0 + epsilon);
    state.heap.reserve(state.k);
    state.offsets.assign(static_cast<std::size_t>(dim_), 0.0);
    search_recursive(0, 0.0, state);

    std::sort(state.heap.begin(), state.heap.end(),
              [](const Neighbor<Scalar>& a, const Neighbor<Scalar>& b) {
                return a.distance_sq != b.distance_sq ? a.distance_sq < b.distance_sq
                                                      : a.id < b.id;
              });
    return state.heap;
  }

 private:
  static constexpr Eigen::Index kLeafSize = 8;

  struct Node {
    int split_dim = -1;  // -1 marks a leaf
    Scalar split_val = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    Eigen::Index begin = 0;
    Eigen::Index end = 0;
  };

  struct SearchState {
    const Eigen::Ref<const Vector>* query = nullptr;
    std::size_t k = 0;
    double prune_scale = 1.0;
    std::vector<Neighbor<Scalar>> heap;  // max-heap by (distance, id)
    std::vector<double> offsets;
  };

  static bool heap_less(const Neighbor<Scalar>& a, const Neighbor<Scalar>& b) {
    return a.distance_sq != b.distance_sq ? a.distance_sq < b.distance_sq : a.id < b.id;
  }

  static std::int32_t build_recursive(const Matrix& points,
                                      const std::vector<std::int64_t>& ids,
                                      std::vector<Eigen::Index>& order, Eigen::Index begin,
                                      Eigen::Index end, KdTree& tree) {
    const std::int32_t node_index = static_cast<std::int32_t>(tree.nodes_.size());
    tree.nodes_.emplace_back();

    if (end - begin <= kLeafSize) {
      // Sort leaf contents by id so the stored layout is input-order
      // deterministic regardless of nth_element internals.
      std::sort(order.begin() + begin, order.begin() + end,
                [&](Eigen::Index a, Eigen::Index b) { return ids[a] < ids[b]; });
      Node& leaf = tree.nodes_[node_index];
      leaf.begin = begin;
      leaf.end = end;
      return node_index;
    }

    // Split dimension: maximum spread over this range.
    int best_dim = 0;
    Scalar best_spread = -1;
    for (int d = 0; d < tree.dim_; ++d) {
      Scalar lo = points(d, order[begin]);
      Scalar hi = lo;
      for (Eigen::Index i = begin + 1; i < end; ++i) {
        const Scalar v = points(d, order[i]);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const Scalar spread = hi - lo;
      if (spread > best_spread) {
        best_spread = spread;
        best_dim = d;
      }
    }

    const Eigen::Index mid = begin + (end - begin) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](Eigen::Index a, Eigen::Index b) {
                       const Scalar va = points(best_dim, a);
                       const Scalar vb = points(best_dim, b);
                       return va != vb ? va < vb : ids[a] < ids[b];
                     });
    const Scalar split_val = points(best_dim, order[mid]);

    const std::int32_t left = build_recursive(points, ids, order, begin, mid, tree);
    const std::int32_t right = build_recursive(points, ids, order, mid, end, tree);
    Node& node = tree.nodes_[node_index];
    node.split_dim = best_dim;
    node.split_val = split_val;
    node.left = left;
    node.right = right;
    return node_index;
  }

  void search_recursive(std::int32_t node_index, double rd, SearchState& state) const {
    // Pruning contract: visit only while bound <= current-best / (1 + eps).
    if (state.heap.size() == state.k &&
        rd * state.prune_scale > static_cast<double>(state.heap.front().distance_sq))
      return;

    const Node& node = nodes_[static_cast<std::size_t>(node_index)];
    if (node.split_dim < 0) {
      for (Eigen::Index i = node.begin; i < node.end; ++i) {
        const Scalar d = (points_.col(i) - *state.query).squaredNorm();
        offer(Neighbor<Scalar>{ids_[static_cast<std::size_t>(i)], d}, state);
      }
      return;
    }

    const double diff =
        static_cast<double>((*state.query)[node.split_dim]) - static_cast<double>(node.split_val);
    const std::int32_t near = diff <= 0.0 ? node.left : node.right;
    const std::int32_t far = diff <= 0.0 ? node.right : node.left;

    search_recursive(near, rd, state);

    const double old_offset = state.offsets[static_cast<std::size_t>(node.split_dim)];
    const double rd_far = rd - old_offset * old_offset + diff * diff;
    state.offsets[static_cast<std::size_t>(node.split_dim)] = diff;
    search_recursive(far, rd_far, state);
    state.offsets[static_cast<std::size_t>(node.split_dim)] = old_offset;
  }

  void offer(const Neighbor<Scalar>& candidate, SearchState& state) const {
    if (state.heap.size() < state.k) {
      state.heap.push_back(candidate);
      std::push_heap(state.heap.begin(), state.heap.end(), heap_less);
    } else if (heap_less(candidate, state.heap.front())) {
      std::pop_heap(state.heap.begin(), state.heap.end(), heap_less);
      state.heap.back() = candidate;
      std::push_heap(state.heap.begin(), state.heap.end(), heap_less);
    }
  }

  Eigen::Index dim_ = 0;
  Matrix points_;
  std::vector<std::int64_t> ids_;
  std::vector<Node> nodes_;
};

}  // namespace hloc
