#include "hloc/pipeline.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <fstream>
#include <optional>
#include <thread>

#include "hloc/covisibility.hpp"
#include "hloc/errors.hpp"

namespace hloc {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void fill_localized(LocalizationResult& result, const PoseEstimate& estimate) {
  result.status = LocalizationStatus::kLocalized;
  result.pose = estimate.pose;
  result.num_inliers = static_cast<int>(estimate.inlier_matches.size());
}

// The direct-mode matcher is passed in when a batch has already built it;
// otherwise it is built here (and its construction counts as matching time).
LocalizationResult localize_impl(const GlobalIndex& index, const VisualMap& map,
                                 const QueryFrame& query, const PipelineParams& params,
                                 const LandmarkMatcher* whole_map_matcher) {
  if (params.num_priors < 1) throw ValidationError("pipeline: num_priors must be >= 1");

  LocalizationResult result;
  result.stage_timings = {{kStageGlobalSearch, 0.0},
                          {kStageClustering, 0.0},
                          {kStageMatching, 0.0},
                          {kStagePnp, 0.0},
                          {kStageTotal, 0.0}};
  const auto landmark_position = [&map](std::int64_t id) { return map.landmark(id).position; };
  const auto total_start = Clock::now();

  if (params.mode == PipelineMode::kDirect) {
    result.places_retrieved = 1;
    result.places_evaluated = 1;
    auto start = Clock::now();
    const std::vector<Match2D3D> matches =
        whole_map_matcher ? whole_map_matcher->match(query, params.match)
                          : match_all(map, query, params.match);
    result.stage_timings[kStageMatching] = ms_since(start);

    start = Clock::now();
    const PnpOutcome outcome = ransac_pnp(matches, landmark_position, query, params.ransac);
    result.stage_timings[kStagePnp] = ms_since(start);
    if (outcome.estimate) fill_localized(result, *outcome.estimate);
  } else {
    // The index covers every keyframe, so N is capped by the map size
    // (retrieval cannot return more frames than exist).
    const int n = static_cast<int>(std::min<std::size_t>(
        static_cast<std::size_t>(params.num_priors), map.keyframes().size()));
    auto start = Clock::now();
    const std::vector<std::int64_t> priors =
        retrieve_priors(index, query.global_descriptor.cast<double>(), n);
    result.stage_timings[kStageGlobalSearch] = ms_since(start);

    start = Clock::now();
    const std::vector<Place> places = cluster_priors(map, priors);
    result.stage_timings[kStageClustering] = ms_since(start);
    result.places_retrieved = static_cast<int>(places.size());

    for (const Place& place : places) {
      start = Clock::now();
      const std::vector<Match2D3D> matches = match_place(map, place, query, params.match);
      result.stage_timings[kStageMatching] += ms_since(start);

      start = Clock::now();
      const PnpOutcome outcome = ransac_pnp(matches, landmark_position, query, params.ransac);
      result.stage_timings[kStagePnp] += ms_since(start);

      ++result.places_evaluated;
      if (outcome.estimate) {
        fill_localized(result, *outcome.estimate);
        break;
      }
    }
    // Exhausting the loop leaves places_evaluated == places_retrieved, the
    // required postcondition of a failed query.
  }

  result.stage_timings[kStageTotal] = ms_since(total_start);
  return result;
}

}  // namespace

LocalizationResult localize(const GlobalIndex& index, const VisualMap& map,
                            const QueryFrame& query, const PipelineParams& params) {
  return localize_impl(index, map, query, params, nullptr);
}

std::vector<LocalizationResult> localize_batch(const GlobalIndex& index, const VisualMap& map,
                                               const std::vector<QueryFrame>& queries,
                                               const PipelineParams& params, int num_threads) {
  if (num_threads < 1) throw ValidationError("pipeline: num_threads must be >= 1");
  std::vector<LocalizationResult> results(queries.size());
  if (queries.empty()) return results;

  std::optional<LandmarkMatcher> whole_map_matcher;
  if (params.mode == PipelineMode::kDirect) {
    std::vector<std::int64_t> ids;
    ids.reserve(map.landmarks().size());
    for (const Landmark& lm : map.landmarks()) ids.push_back(lm.id);
    whole_map_matcher.emplace(map, ids);
  }
  const LandmarkMatcher* matcher = whole_map_matcher ? &*whole_map_matcher : nullptr;

  const auto run_one = [&](std::size_t i) {
    try {
      results[i] = localize_impl(index, map, queries[i], params, matcher);
    } catch (const std::exception&) {
      results[i] = LocalizationResult{};  // recorded as failed; the batch goes on
    }
  };

  if (num_threads == 1 || queries.size() == 1) {
    for (std::size_t i = 0; i < queries.size(); ++i) run_one(i);
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const int worker_count = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(num_threads), queries.size()));
  workers.reserve(static_cast<std::size_t>(worker_count));
  for (int t = 0; t < worker_count; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < queries.size(); i = next.fetch_add(1))
        run_one(i);
    });
  }
  for (std::thread& w : workers) w.join();
  return results;
}

void save_results(const std::filesystem::path& path, const std::vector<QueryFrame>& queries,
                  const std::vector<LocalizationResult>& results) {
  if (queries.size() != results.size())
    throw ValidationError("results: query and result counts differ");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("results: cannot open '" + path.string() + "' for writing");
  for (std::size_t i = 0; i < results.size(); ++i) {
    const LocalizationResult& r = results[i];
    nlohmann::json record{
        {"id", queries[i].id},
        {"status", r.status == LocalizationStatus::kLocalized ? "localized" : "failed"},
        {"num_inliers", r.num_inliers},
        {"places_retrieved", r.places_retrieved},
        {"places_evaluated", r.places_evaluated},
        {"timings", r.stage_timings},
    };
    if (r.status == LocalizationStatus::kLocalized) {
      const Eigen::Quaterniond& q = r.pose.rotation;
      record["q_wxyz"] = {q.w(), q.x(), q.y(), q.z()};
      record["t_xyz"] = {r.pose.translation.x(), r.pose.translation.y(),
                         r.pose.translation.z()};
    }
    out << record.dump() << '\n';
  }
  if (!out) throw IoError("results: write to '" + path.string() + "' failed");
}

std::vector<ResultRecord> load_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("results: cannot open '" + path.string() + "'");
  std::vector<ResultRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
      ResultRecord record;
      record.query_id = doc.at("id").get<std::int64_t>();
      LocalizationResult& r = record.result;
      const std::string status = doc.at("status").get<std::string>();
      if (status != "localized" && status != "failed")
        throw ValidationError("results: unknown status '" + status + "'");
      r.status =
          status == "localized" ? LocalizationStatus::kLocalized : LocalizationStatus::kFailed;
      r.num_inliers = doc.at("num_inliers").get<int>();
      r.places_retrieved = doc.at("places_retrieved").get<int>();
      r.places_evaluated = doc.at("places_evaluated").get<int>();
      r.stage_timings = doc.at("timings").get<std::map<std::string, double>>();
      if (r.status == LocalizationStatus::kLocalized) {
        const auto q = doc.at("q_wxyz");
        const auto t = doc.at("t_xyz");
        if (q.size() != 4 || t.size() != 3)
          throw ValidationError("results: malformed pose");
        r.pose.rotation = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(),
                                             q[2].get<double>(), q[3].get<double>());
        r.pose.translation =
            Eigen::Vector3d(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
      }
      records.push_back(std::move(record));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("results: line " + std::to_string(line_no) + " of '" +
                            path.string() + "': " + e.what());
    }
  }
  return records;
}

}  // namespace hloc
