#include "hloc/cli_app.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "hloc/errors.hpp"
#include "hloc/eval.hpp"
#include "hloc/global_index.hpp"
#include "hloc/map_model.hpp"
#include "hloc/pipeline.hpp"
#include "hloc/synth.hpp"

namespace hloc {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Stable exit-code contract: scripts may rely on these.
constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitInternal = 4;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// The only environment knob: worker threads for the localize batch.
int env_thread_count() {
  const char* raw = std::getenv("HLOC_THREADS");
  if (raw == nullptr || *raw == '\0') {
    return 1;
  }
  char* end = nullptr;
  const long value = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || value < 1) {
    throw ValidationError("HLOC_THREADS must be a positive integer, got '" + std::string(raw) +
                          "'");
  }
  return static_cast<int>(value);
}

std::string format_fixed(double value, int decimals) {
  if (std::isnan(value)) {
    return "undefined";
  }
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", decimals, value);
  return buffer;
}

struct IndexOptions {
  std::string map_path;
  std::string out_path;
  Eigen::Index pca_dim = kDefaultPcaDim;
};

struct LocalizeOptions {
  std::string map_path;
  std::string index_path;
  std::string queries_path;
  std::string out_path;
  PipelineParams params;
  bool verbose = false;
};

struct EvalOptions {
  std::string results_path;
  std::string queries_path;
  std::string out_dir = ".";
  std::string map_path;    // optional; with index_path enables retrieval recall
  std::string index_path;
  EvalParams params;
};

struct SynthOptions {
  std::string out_dir = ".";
  bool text = false;
  SynthConfig config;
};

int cmd_index(const IndexOptions& opt) {
  const auto start = Clock::now();
  const VisualMap map = load_map(opt.map_path);
  const GlobalIndex index = build_global_index(map, opt.pca_dim);
  save_projector(index.projector, opt.out_path);
  std::cout << "Indexed " << map.keyframes().size() << " keyframes at d_p = "
            << index.projector.output_dim() << " in " << format_fixed(ms_since(start), 1)
            << " ms\n";
  return kExitOk;
}

int cmd_localize(const LocalizeOptions& opt) {
  const VisualMap map = load_map(opt.map_path);
  const GlobalIndex index = build_global_index(map, load_projector(opt.index_path));
  std::vector<QueryFrame> queries = load_queries(opt.queries_path);
  bind_cameras(queries, map);

  const auto start = Clock::now();
  const std::vector<LocalizationResult> results =
      localize_batch(index, map, queries, opt.params, env_thread_count());
  const double elapsed = ms_since(start);
  save_results(opt.out_path, queries, results);

  std::size_t localized = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const bool ok = results[i].status == LocalizationStatus::kLocalized;
    localized += ok ? 1 : 0;
    if (opt.verbose) {
      std::cout << "query " << queries[i].id << ": " << (ok ? "localized" : "failed")
                << " (inliers " << results[i].num_inliers << ", places "
                << results[i].places_evaluated << "/" << results[i].places_retrieved << ")\n";
    }
  }
  std::cout << "Localized " << localized << "/" << results.size() << " queries in "
            << format_fixed(elapsed, 1) << " ms\n";
  return kExitOk;
}

int cmd_eval(const EvalOptions& opt) {
  if (opt.map_path.empty() != opt.index_path.empty()) {
    throw ValidationError("eval: --map and --index must be given together");
  }

  const std::vector<ResultRecord> records = load_results(opt.results_path);
  const std::vector<QueryFrame> queries = load_queries(opt.queries_path);

  std::unordered_map<std::int64_t, const QueryFrame*> by_id;
  for (const QueryFrame& q : queries) {
    if (!by_id.emplace(q.id, &q).second) {
      throw ValidationError("eval: duplicate query id " + std::to_string(q.id));
    }
  }

  // Results pair with ground truth through query ids, so a reordered or
  // filtered results file still evaluates correctly.
  std::vector<LocalizationResult> results;
  std::vector<Pose> gt;
  results.reserve(records.size());
  gt.reserve(records.size());
  for (const ResultRecord& rec : records) {
    const auto it = by_id.find(rec.query_id);
    if (it == by_id.end()) {
      throw ValidationError("eval: results reference unknown query id " +
                            std::to_string(rec.query_id));
    }
    if (!it->second->gt_pose) {
      throw ValidationError("eval: query " + std::to_string(rec.query_id) +
                            " has no ground-truth pose");
    }
    results.push_back(rec.result);
    gt.push_back(*it->second->gt_pose);
  }

  EvalReport report = localization_metrics(results, gt, opt.params);

  fs::create_directories(opt.out_dir);
  const fs::path out_dir = opt.out_dir;
  write_metrics_csv(report, opt.params, out_dir / "metrics.csv");
  write_stats_csv(report, out_dir / "stats.csv");
  write_cumulative_errors_csv(report, out_dir / "cumulative_errors.csv");
  write_timings_csv(results, out_dir / "timings.csv");

  if (!opt.map_path.empty()) {
    const VisualMap map = load_map(opt.map_path);
    const GlobalIndex index = build_global_index(map, load_projector(opt.index_path));
    std::vector<Pose> query_gt;
    query_gt.reserve(queries.size());
    for (const QueryFrame& q : queries) {
      if (!q.gt_pose) {
        throw ValidationError("eval: query " + std::to_string(q.id) +
                              " has no ground-truth pose");
      }
      query_gt.push_back(*q.gt_pose);
    }
    report.retrieval_recall_at_n = retrieval_recall(index, map, queries, query_gt,
                                                    opt.params.retrieval_n_values, opt.params);
    write_recall_at_n_csv(report.retrieval_recall_at_n, out_dir / "recall_at_n.csv");
  }

  char threshold[32];
  std::snprintf(threshold, sizeof(threshold), "%g", opt.params.position_threshold_m);
  const std::string recall_label = "Recall@" + std::string(threshold) + "m";
  const std::string precision_label = "Precision@" + std::string(threshold) + "m";
  std::printf("%-18s %s\n", recall_label.c_str(),
              format_fixed(100.0 * report.recall_at_threshold, 1).c_str());
  std::printf("%-18s %s\n", precision_label.c_str(),
              format_fixed(100.0 * report.precision_at_threshold, 1).c_str());
  std::printf("%-18s %s\n", "Median error (m)",
              format_fixed(report.median_error_m, 3).c_str());
  return kExitOk;
}

int cmd_synth(const SynthOptions& opt) {
  const SynthWorld world = generate_world(opt.config);
  fs::create_directories(opt.out_dir);
  const MapFormat format = opt.text ? MapFormat::kText : MapFormat::kBinary;
  const fs::path out_dir = opt.out_dir;
  save_map(world.map, out_dir / "map.json", format);
  save_queries(world.queries, out_dir / "queries.json", format);
  std::cout << "Generated " << world.map.keyframes().size() << " keyframes, "
            << world.map.landmarks().size() << " landmarks, " << world.queries.size()
            << " queries\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Hierarchical visual localization: synthetic worlds, indexing, retrieval, and pose estimation"};
  app.require_subcommand(1);

  IndexOptions index_opt;
  CLI::App* index_cmd =
      app.add_subcommand("index", "Fit the global-descriptor projector over a map and save it");
  index_cmd->add_option("--map", index_opt.map_path, "Map file")->required();
  index_cmd->add_option("--out", index_opt.out_path, "Output index file")->required();
  index_cmd->add_option("--pca-dim", index_opt.pca_dim, "Projected descriptor dimension d_p")
      ->capture_default_str();

  LocalizeOptions loc_opt;
  CLI::App* localize_cmd =
      app.add_subcommand("localize", "Localize a batch of queries against an indexed map");
  localize_cmd->add_option("--map", loc_opt.map_path, "Map file")->required();
  localize_cmd->add_option("--index", loc_opt.index_path, "Index file from 'index'")->required();
  localize_cmd->add_option("--queries", loc_opt.queries_path, "Query file")->required();
  localize_cmd->add_option("--out", loc_opt.out_path, "Results file, one record per line")
      ->required();
  localize_cmd->add_option("-n,--num-priors", loc_opt.params.num_priors,
                           "Retrieved prior keyframes N")
      ->capture_default_str();
  const std::map<std::string, PipelineMode> modes{{"hierarchical", PipelineMode::kHierarchical},
                                                  {"direct", PipelineMode::kDirect}};
  localize_cmd->add_option("--mode", loc_opt.params.mode, "hierarchical | direct")
      ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
  localize_cmd->add_option("--epsilon", loc_opt.params.match.epsilon,
                           "Approximate-search slack of 2D-3D matching (0 = exact)")
      ->capture_default_str();
  localize_cmd->add_option("--ratio-threshold", loc_opt.params.match.ratio_threshold,
                           "Ratio-test threshold")
      ->capture_default_str();
  localize_cmd->add_option("--max-descriptor-distance",
                           loc_opt.params.match.max_descriptor_distance,
                           "Absolute gate on squared descriptor distance")
      ->capture_default_str();
  localize_cmd->add_option("--ransac-threshold", loc_opt.params.ransac.reprojection_threshold_px,
                           "Inlier reprojection threshold (px)")
      ->capture_default_str();
  localize_cmd->add_option("--ransac-confidence", loc_opt.params.ransac.confidence,
                           "RANSAC stopping confidence")
      ->capture_default_str();
  localize_cmd->add_option("--ransac-iterations", loc_opt.params.ransac.max_iterations,
                           "RANSAC iteration cap")
      ->capture_default_str();
  localize_cmd->add_option("--min-inliers", loc_opt.params.ransac.min_inliers,
                           "Minimum inliers for a valid pose")
      ->capture_default_str();
  localize_cmd->add_option("--seed", loc_opt.params.ransac.rng_seed, "RANSAC seed")
      ->capture_default_str();
  localize_cmd->add_flag("--refine,!--no-refine", loc_opt.params.ransac.refine,
                         "Refine the pose over the inlier set");
  localize_cmd->add_flag("-v,--verbose", loc_opt.verbose, "Print one line per query");

  EvalOptions eval_opt;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Aggregate a results file into metrics CSVs and a summary table");
  eval_cmd->add_option("--results", eval_opt.results_path, "Results file from 'localize'")
      ->required();
  eval_cmd->add_option("--queries", eval_opt.queries_path, "Query file with ground truth")
      ->required();
  eval_cmd->add_option("--out-dir", eval_opt.out_dir, "Directory for the CSV outputs")
      ->capture_default_str();
  eval_cmd->add_option("--map", eval_opt.map_path,
                       "Map file; with --index, also computes retrieval recall");
  eval_cmd->add_option("--index", eval_opt.index_path,
                       "Index file; with --map, also computes retrieval recall");
  eval_cmd->add_option("--position-threshold", eval_opt.params.position_threshold_m,
                       "Position error threshold (m) for recall/precision")
      ->capture_default_str();
  eval_cmd->add_option("--gt-distance", eval_opt.params.gt_match_distance_m,
                       "Ground-truth match distance bound (m)")
      ->capture_default_str();
  eval_cmd->add_option("--gt-angle", eval_opt.params.gt_match_angle_deg,
                       "Ground-truth match angle bound (deg)")
      ->capture_default_str();
  eval_cmd->add_option("--recall-n", eval_opt.params.retrieval_n_values,
                       "n values for retrieval recall")
      ->capture_default_str();

  SynthOptions synth_opt;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic map and query set");
  synth_cmd->add_option("--out-dir", synth_opt.out_dir, "Output directory (map.json, queries.json)")
      ->capture_default_str();
  synth_cmd->add_flag("--text", synth_opt.text,
                      "Inline descriptors as JSON instead of a binary sidecar");
  synth_cmd->add_option("--seed", synth_opt.config.rng_seed, "World seed")->capture_default_str();
  synth_cmd->add_option("--places", synth_opt.config.num_places, "Number of places")
      ->capture_default_str();
  synth_cmd->add_option("--keyframes-per-place", synth_opt.config.keyframes_per_place,
                        "Keyframes per place")
      ->capture_default_str();
  synth_cmd->add_option("--landmarks-per-place", synth_opt.config.landmarks_per_place,
                        "Landmarks per place")
      ->capture_default_str();
  synth_cmd->add_option("--queries-per-place", synth_opt.config.queries_per_place,
                        "Queries per place")
      ->capture_default_str();
  synth_cmd->add_option("--spacing", synth_opt.config.trajectory_spacing_m,
                        "Keyframe spacing along the trajectory (m)")
      ->capture_default_str();
  synth_cmd->add_option("--keypoint-noise", synth_opt.config.keypoint_noise_px,
                        "Keypoint noise (px)")
      ->capture_default_str();
  synth_cmd->add_option("--local-noise", synth_opt.config.local_descriptor_noise_sigma,
                        "Local descriptor noise sigma")
      ->capture_default_str();
  synth_cmd->add_option("--global-noise", synth_opt.config.global_descriptor_noise_sigma,
                        "Global descriptor noise sigma")
      ->capture_default_str();
  synth_cmd->add_option("--alias", synth_opt.config.aliasing_pairs,
                        "Aliased place pair 'A B' (repeatable)");
  synth_cmd->add_option("--distractors", synth_opt.config.distractor_keypoints_per_query,
                        "Distractor keypoints per query")
      ->capture_default_str();
  synth_cmd->add_option("--query-offset", synth_opt.config.query_offset_position_m,
                        "Query pose offset (m)")
      ->capture_default_str();
  synth_cmd->add_option("--query-angle", synth_opt.config.query_offset_angle_deg,
                        "Query pose offset (deg)")
      ->capture_default_str();
  synth_cmd->add_option("--observations-per-landmark",
                        synth_opt.config.observations_per_landmark,
                        "Keyframe observations per landmark")
      ->capture_default_str();
  synth_cmd->add_option("--query-keypoints", synth_opt.config.query_keypoints,
                        "Keypoints per query")
      ->capture_default_str();
  synth_cmd->add_option("--shared-vocabulary", synth_opt.config.shared_vocabulary_size,
                        "Shared local-descriptor vocabulary size (0 = independent prototypes)")
      ->capture_default_str();
  synth_cmd->add_option("--global-dim", synth_opt.config.global_descriptor_dim,
                        "Global descriptor dimension")
      ->capture_default_str();
  synth_cmd->add_option("--local-dim", synth_opt.config.local_descriptor_dim,
                        "Local descriptor dimension")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (index_cmd->parsed()) {
      return cmd_index(index_opt);
    }
    if (localize_cmd->parsed()) {
      return cmd_localize(loc_opt);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(eval_opt);
    }
    if (synth_cmd->parsed()) {
      return cmd_synth(synth_opt);
    }
    return kExitValidation;  // unreachable: require_subcommand(1)
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("hloc");
  for (const std::string& arg : args) {
    argv.push_back(arg.c_str());
  }
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace hloc
