#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hloc/global_index.hpp"
#include "hloc/map_model.hpp"
#include "hloc/matching.hpp"
#include "hloc/pnp.hpp"

namespace hloc {

enum class PipelineMode { kHierarchical, kDirect };

struct PipelineParams {
  int num_priors = 10;  // N, the number of retrieved prior frames
  MatchParams match;
  RansacParams ransac;
  PipelineMode mode = PipelineMode::kHierarchical;
};

enum class LocalizationStatus { kLocalized, kFailed };

// Stage keys of LocalizationResult::stage_timings. Every result carries all
// five; stages that do not run in a mode (retrieval and clustering in direct
// mode) report 0.
inline constexpr const char* kStageGlobalSearch = "Global search";
inline constexpr const char* kStageClustering = "Covisibility clustering";
inline constexpr const char* kStageMatching = "2D-3D matching";
inline constexpr const char* kStagePnp = "PnP-RANSAC";
inline constexpr const char* kStageTotal = "Total";

struct LocalizationResult {
  LocalizationStatus status = LocalizationStatus::kFailed;
  Pose pose;  // world -> camera; meaningful only when localized
  int num_inliers = 0;
  int places_retrieved = 0;
  int places_evaluated = 0;
  std::map<std::string, double> stage_timings;  // stage name -> milliseconds
};

/// Localizes one query against the map.
///
/// Hierarchical mode: retrieve N prior keyframes, cluster them into places,
/// then match and solve each place in rank order until a valid pose is
/// found; places past the successful one are never touched. Direct mode:
/// one match over every landmark in the map, then one solve
/// (places_retrieved = places_evaluated = 1 by convention).
///
/// A query with zero keypoints yields a failed result, not an exception;
/// structural errors (dimension mismatches, invalid parameters) propagate.
LocalizationResult localize(const GlobalIndex& index, const VisualMap& map,
                            const QueryFrame& query, const PipelineParams& params);

/// Elementwise localize; results keep input order. Queries are independent,
/// so they may be processed by num_threads workers; results are identical
/// for every thread count (timings aside). A query that throws is recorded
/// as failed rather than aborting the batch. In direct mode the whole-map
/// matcher is built once and shared, so per-query matching timings exclude
/// that one-time cost.
std::vector<LocalizationResult> localize_batch(const GlobalIndex& index, const VisualMap& map,
                                               const std::vector<QueryFrame>& queries,
                                               const PipelineParams& params,
                                               int num_threads = 1);

/// One line-delimited record per query (JSON), pairing query ids with
/// results so downstream evaluation can align them with ground truth.
void save_results(const std::filesystem::path& path, const std::vector<QueryFrame>& queries,
                  const std::vector<LocalizationResult>& results);

struct ResultRecord {
  std::int64_t query_id = 0;
  LocalizationResult result;
};

std::vector<ResultRecord> load_results(const std::filesystem::path& path);

}  // namespace hloc
