#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "hloc/global_index.hpp"
#include "hloc/map_model.hpp"
#include "hloc/matching.hpp"
#include "hloc/pipeline.hpp"

namespace hloc {

struct EvalParams {
  /// Position error below which a returned pose counts as correct.
  double position_threshold_m = 0.1;
  /// A keyframe is a retrieval ground-truth match when it lies within both
  /// of these bounds of the query's true pose.
  double gt_match_distance_m = 5.0;
  double gt_match_angle_deg = 90.0;
  std::vector<int> retrieval_n_values = {1, 2, 5, 10, 20};
};

/// Aggregated localization quality. Fractions are in [0, 1]; precision and
/// median are NaN when no query localized (they have no denominator).
struct EvalReport {
  double recall_at_threshold = 0.0;
  double precision_at_threshold = 0.0;
  double median_error_m = 0.0;
  double mean_places_retrieved = 0.0;
  double mean_places_evaluated = 0.0;
  double mean_inliers = 0.0;
  std::vector<std::pair<int, double>> retrieval_recall_at_n;      // filled by retrieval_recall
  std::vector<std::pair<double, double>> cumulative_error_curve;  // (error m, fraction)
  std::size_t num_queries = 0;
  std::size_t num_localized = 0;
};

/// Fraction of queries whose top-n retrieved keyframes contain at least one
/// ground-truth match, for each n (clamped to the map size). A match is a
/// keyframe within both gt thresholds of the query's true pose; queries
/// without any match in the whole map are excluded, and it is an error if
/// none remain.
std::vector<std::pair<int, double>> retrieval_recall(const GlobalIndex& index,
                                                     const VisualMap& map,
                                                     const std::vector<QueryFrame>& queries,
                                                     const std::vector<Pose>& gt_poses,
                                                     const std::vector<int>& n_values,
                                                     const EvalParams& params);

/// Position-only metrics against aligned ground-truth poses: recall over all
/// queries, precision and median over localized ones, means over all, and
/// the cumulative error curve over all (failed queries never localize).
EvalReport localization_metrics(const std::vector<LocalizationResult>& results,
                                const std::vector<Pose>& gt_poses, const EvalParams& params);

/// CSV outputs, one file per table/figure analog. Values are written with a
/// fixed format so identical runs produce identical bytes; undefined
/// precision/median appear as the literal "undefined".
void write_metrics_csv(const EvalReport& report, const EvalParams& params,
                       const std::filesystem::path& path);
void write_stats_csv(const EvalReport& report, const std::filesystem::path& path);
void write_recall_at_n_csv(const std::vector<std::pair<int, double>>& recall_at_n,
                           const std::filesystem::path& path);
void write_cumulative_errors_csv(const EvalReport& report, const std::filesystem::path& path);
void write_timings_csv(const std::vector<LocalizationResult>& results,
                       const std::filesystem::path& path);

}  // namespace hloc
