#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hloc/map_model.hpp"

namespace hloc {

/// One connected component of the retrieved prior frames under shared-landmark
/// covisibility: a distinct candidate location.
struct Place {
  std::vector<std::int64_t> keyframe_ids;  // ascending, nonempty
  std::vector<std::int64_t> landmark_ids;  // ascending union over the keyframes
  int rank = 0;                            // position in the evaluation order
};

/// Partitions the prior frames into places. Two priors share a place iff they
/// are linked by a chain of co-observed landmarks *within the prior set* —
/// connectivity through frames that were not retrieved does not count.
/// Output order (and rank): descending keyframe count, ties by smallest
/// minimum keyframe id. Duplicate prior ids are collapsed.
std::vector<Place> cluster_priors(const VisualMap& map,
                                  std::span<const std::int64_t> prior_ids);

}  // namespace hloc
