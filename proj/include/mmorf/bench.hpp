#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmorf/planner.hpp"

namespace mmorf {

struct BenchmarkSummary {
  int n_tasks = 0;
  int present_count = 0;
  int valid_count = 0;
  int success_count = 0;
  double pr = 0.0;
  double vr = 0.0;
  double sr = 0.0;
  double p_minus_s = 0.0;
  // over valid routes only
  double avg_carc = 0.0;
  double avg_pyro = 0.0;
  double avg_ghs = 0.0;
  double avg_smp = 0.0;
  double avg_rl = 0.0;

  nlohmann::json to_json() const;
};

/// Percentages from raw counts; rates are never derived from rounded
/// percentages.
BenchmarkSummary summary_from_counts(int n_tasks, int present, int valid, int success);

BenchmarkSummary compute_summary(
    const std::vector<std::pair<PlanResult, std::vector<Constraint>>>& results,
    const World& world);

struct RestrictionDbEntry {
  std::vector<std::string> molecules;
  std::vector<std::string> specific_reactions;
  std::vector<std::string> reaction_templates;
  int depth_limit = -1;
  std::string rationale;
  std::vector<std::string> apply_when;
};

std::vector<RestrictionDbEntry> load_restriction_db(const std::string& path);
std::vector<RestrictionDbEntry> restriction_db_from_json_text(const std::string& text);

/// Union of all entries whose apply_when patterns match the product; the
/// most permissive depth limit wins (-1 beats everything).
RestrictionSet staticreg_restrictions(const std::vector<RestrictionDbEntry>& db,
                                      const std::string& product);

struct ObjectiveAverages {
  double carc = 0.0;
  double pyro = 0.0;
  double ghs = 0.0;
  double smp = 0.0;
  double rl = 0.0;
};

struct Pareto10Result {
  std::vector<Route> routes;            // all distinct routes collected
  std::vector<RouteReport> reports;     // parallel to routes
  std::vector<std::size_t> front;       // indices into reports
  std::optional<ObjectiveAverages> averages;  // over the front

  nlohmann::json to_json() const;
};

Pareto10Result pareto10(const Task& task, const World& world,
                        const SearchConfig& config);

struct GhsClientConfig {
  bool http_enabled = false;
  std::string base_url;  // GET {base_url}/{identifier}
  std::string cache_path;
  int timeout_seconds = 10;
};

/// Consults the on-disk cache first; on a miss performs one HTTP GET and
/// persists the parsed codes. Cache hits never touch the network.
std::set<std::string> fetch_ghs_remote(const std::string& identifier,
                                       const GhsClientConfig& config);

// JSONL persistence for plan results.
void append_results_jsonl(const std::string& path,
                          const std::vector<PlanResult>& results);
std::vector<PlanResult> load_results_jsonl(const std::string& path);

}  // namespace mmorf
