#include "hloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "hloc/errors.hpp"
#include "hloc/geometry.hpp"

namespace hloc {

namespace {

void validate(const EvalParams& params) {
  if (!(params.position_threshold_m > 0.0)) {
    throw ValidationError("eval: position threshold must be positive");
  }
  if (!(params.gt_match_distance_m > 0.0) || !(params.gt_match_angle_deg > 0.0)) {
    throw ValidationError("eval: ground-truth match thresholds must be positive");
  }
}

// Fixed six-decimal formatting keeps CSV bytes identical across runs; NaN
// (no localized query) is spelled out rather than left to printf's "nan".
std::string format_value(double value) {
  if (std::isnan(value)) {
    return "undefined";
  }
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6f", value);
  return buffer;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

}  // namespace

std::vector<std::pair<int, double>> retrieval_recall(const GlobalIndex& index,
                                                     const VisualMap& map,
                                                     const std::vector<QueryFrame>& queries,
                                                     const std::vector<Pose>& gt_poses,
                                                     const std::vector<int>& n_values,
                                                     const EvalParams& params) {
  validate(params);
  if (queries.size() != gt_poses.size()) {
    throw ValidationError("retrieval_recall: queries and ground-truth poses must align");
  }
  if (n_values.empty()) {
    throw ValidationError("retrieval_recall: n_values must be non-empty");
  }
  int max_n = 0;
  for (int n : n_values) {
    if (n < 1) {
      throw ValidationError("retrieval_recall: every n must be >= 1");
    }
    max_n = std::max(max_n, n);
  }

  const auto& keyframes = map.keyframes();
  const int num_keyframes = static_cast<int>(keyframes.size());
  const int retrieve_n = std::min(max_n, num_keyframes);

  // For each query that has at least one ground-truth match anywhere in the
  // map, find the best (lowest) retrieval rank at which a match appears.
  // Recall at any n then falls out of a prefix comparison.
  std::size_t num_kept = 0;
  std::vector<int> match_ranks;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    bool has_gt_match = false;
    for (const Keyframe& kf : keyframes) {
      const PoseError err = pose_error(gt_poses[q], kf.pose);
      if (err.position_m <= params.gt_match_distance_m &&
          err.angle_deg <= params.gt_match_angle_deg) {
        has_gt_match = true;
        break;
      }
    }
    if (!has_gt_match) {
      continue;  // no keyframe could ever be a correct retrieval for this query
    }
    ++num_kept;

    const std::vector<std::int64_t> retrieved =
        retrieve_priors(index, queries[q].global_descriptor.cast<double>(), retrieve_n);
    int first_match_rank = retrieve_n;  // sentinel: beyond every requested n
    for (int rank = 0; rank < static_cast<int>(retrieved.size()); ++rank) {
      const PoseError err = pose_error(gt_poses[q], map.keyframe(retrieved[rank]).pose);
      if (err.position_m <= params.gt_match_distance_m &&
          err.angle_deg <= params.gt_match_angle_deg) {
        first_match_rank = rank;
        break;
      }
    }
    match_ranks.push_back(first_match_rank);
  }

  if (num_kept == 0) {
    throw ValidationError("retrieval_recall: no query has a ground-truth match");
  }

  std::vector<std::pair<int, double>> recalls;
  recalls.reserve(n_values.size());
  for (int n : n_values) {
    std::size_t hits = 0;
    for (int rank : match_ranks) {
      if (rank < std::min(n, retrieve_n)) {
        ++hits;
      }
    }
    recalls.emplace_back(n, static_cast<double>(hits) / static_cast<double>(num_kept));
  }
  return recalls;
}

EvalReport localization_metrics(const std::vector<LocalizationResult>& results,
                                const std::vector<Pose>& gt_poses, const EvalParams& params) {
  validate(params);
  if (results.size() != gt_poses.size()) {
    throw ValidationError("localization_metrics: results and ground-truth poses must align");
  }

  constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();
  EvalReport report;
  report.num_queries = results.size();
  if (results.empty()) {
    report.precision_at_threshold = kUndefined;
    report.median_error_m = kUndefined;
    return report;
  }

  const double total = static_cast<double>(results.size());
  std::vector<double> errors;  // position errors of localized queries only
  double sum_retrieved = 0.0;
  double sum_evaluated = 0.0;
  double sum_inliers = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const LocalizationResult& r = results[i];
    sum_retrieved += static_cast<double>(r.places_retrieved);
    sum_evaluated += static_cast<double>(r.places_evaluated);
    sum_inliers += static_cast<double>(r.num_inliers);
    if (r.status == LocalizationStatus::kLocalized) {
      errors.push_back(pose_error(r.pose, gt_poses[i]).position_m);
    }
  }
  report.num_localized = errors.size();
  report.mean_places_retrieved = sum_retrieved / total;
  report.mean_places_evaluated = sum_evaluated / total;
  report.mean_inliers = sum_inliers / total;

  std::sort(errors.begin(), errors.end());
  const std::size_t within =
      std::upper_bound(errors.begin(), errors.end(), params.position_threshold_m) -
      errors.begin();

  // Recall counts all queries; precision and the median only make sense over
  // queries that actually returned a pose.
  report.recall_at_threshold = static_cast<double>(within) / total;
  if (errors.empty()) {
    report.precision_at_threshold = kUndefined;
    report.median_error_m = kUndefined;
  } else {
    report.precision_at_threshold =
        static_cast<double>(within) / static_cast<double>(errors.size());
    const std::size_t mid = errors.size() / 2;
    report.median_error_m = (errors.size() % 2 == 1)
                                ? errors[mid]
                                : 0.5 * (errors[mid - 1] + errors[mid]);
  }

  // Cumulative distribution over all queries: failed ones never localize, so
  // they lift the denominator but contribute no point. Evaluating the curve
  // at the threshold reproduces recall_at_threshold exactly (same division).
  report.cumulative_error_curve.reserve(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    report.cumulative_error_curve.emplace_back(errors[i],
                                               static_cast<double>(i + 1) / total);
  }
  return report;
}

void write_metrics_csv(const EvalReport& report, const EvalParams& params,
                       const std::filesystem::path& path) {
  char threshold[32];
  std::snprintf(threshold, sizeof(threshold), "%g", params.position_threshold_m);
  std::ofstream out = open_csv(path);
  out << "Recall@" << threshold << "m,Precision@" << threshold << "m,Median error (m)\n";
  out << format_value(100.0 * report.recall_at_threshold) << ','
      << format_value(100.0 * report.precision_at_threshold) << ','
      << format_value(report.median_error_m) << '\n';
}

void write_stats_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  out << "Mean places retrieved,Mean places evaluated,Mean inliers,Queries,Localized\n";
  out << format_value(report.mean_places_retrieved) << ','
      << format_value(report.mean_places_evaluated) << ','
      << format_value(report.mean_inliers) << ',' << report.num_queries << ','
      << report.num_localized << '\n';
}

void write_recall_at_n_csv(const std::vector<std::pair<int, double>>& recall_at_n,
                           const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  out << "n,recall\n";
  for (const auto& [n, recall] : recall_at_n) {
    out << n << ',' << format_value(recall) << '\n';
  }
}

void write_cumulative_errors_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  out << "error_m,fraction\n";
  for (const auto& [error, fraction] : report.cumulative_error_curve) {
    out << format_value(error) << ',' << format_value(fraction) << '\n';
  }
}

void write_timings_csv(const std::vector<LocalizationResult>& results,
                       const std::filesystem::path& path) {
  constexpr const char* kStages[] = {kStageGlobalSearch, kStageClustering, kStageMatching,
                                     kStagePnp, kStageTotal};
  std::ofstream out = open_csv(path);
  out << "Stage,Mean ms\n";
  for (const char* stage : kStages) {
    double sum = 0.0;
    for (const LocalizationResult& r : results) {
      const auto it = r.stage_timings.find(stage);
      if (it != r.stage_timings.end()) {
        sum += it->second;
      }
    }
    const double mean = results.empty() ? 0.0 : sum / static_cast<double>(results.size());
    out << stage << ',' << format_value(mean) << '\n';
  }
}

}  // namespace hloc
