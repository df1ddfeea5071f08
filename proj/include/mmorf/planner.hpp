#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmorf/agents.hpp"
#include "mmorf/report.hpp"
#include "mmorf/restrictions.hpp"
#include "mmorf/tasks.hpp"

namespace mmorf {

enum class SystemKind { plain, masil, rfas, staticreg };
SystemKind system_from_string(const std::string& name);
const char* system_name(SystemKind kind);

enum class SelectionPolicy { value, agentic };
enum class ReturnPolicy { first_found, verified };

struct SearchConfig {
  int i_max = 500;
  int i_init = 20;  // masil only: no delegation during the first i_init iterations
  int k_candidates = 5;
  int branching = 10;
  int time_limit_seconds = 7200;
  SystemKind system = SystemKind::plain;
  SelectionPolicy selection_policy = SelectionPolicy::value;
  ReturnPolicy return_policy = ReturnPolicy::first_found;
  AgentConfig agent;
  bool smp_per_occurrence = false;
};

struct EventRecord {
  int iteration = 0;
  std::string type;
  std::string detail;
};

struct RejectedRoute {
  Route route;
  RouteReport report;
  std::string feedback;
};

enum class PlanStatus { solved, failed_budget, failed_exhausted };
const char* plan_status_name(PlanStatus status);
PlanStatus plan_status_from_string(const std::string& name);

struct PlanResult {
  std::string task_id;
  PlanStatus status = PlanStatus::failed_budget;
  std::optional<Route> route;
  std::optional<RouteReport> report;
  int iterations_used = 0;
  double wall_seconds = 0.0;
  std::vector<RejectedRoute> rejected_routes;
  std::vector<EventRecord> event_log;
  std::vector<LlmExchange> transcript;  // not serialized by default

  nlohmann::json to_json() const;
};

PlanResult plan_result_from_json(const nlohmann::json& j);

/// One open (unsolved, non-purchasable) molecule of a candidate.
struct OpenLeaf {
  std::string molecule;
  int depth = 0;  // molecule depth; the root sits at 0
  std::vector<std::string> ancestors;  // molecules on the path from the root
};

/// A partial route: the set of chosen reactions from the root plus its open
/// leaves, in route order. Identity is the reaction set.
struct Candidate {
  int id = 0;
  std::vector<Reaction> reactions;
  std::vector<std::string> reaction_keys;  // canonical strings, parallel
  std::vector<int> depths;                 // branch depth per reaction
  std::vector<OpenLeaf> open;
  bool alive = true;

  RouteState route_state() const;
  std::string key() const;
  std::string label() const { return "c" + std::to_string(id); }
};

struct ExpansionOutcome {
  int children = 0;
  std::vector<int> completed;  // candidate ids with no open leaves
  bool dead_end() const { return children == 0; }
};

struct PruneSummary {
  int pruned = 0;
};

class SearchState {
public:
  SearchState(const Task& task, const World& world, const SearchConfig& config,
              const RestrictionSet* preset = nullptr);

  /// Top-k expandable candidates by current V, ties broken by creation
  /// order. Throws FrontierEmpty when nothing remains.
  std::vector<int> simulate(int k);

  /// agent_choice names a candidate label like "c3" (agentic policy only).
  int select(const std::vector<int>& candidates, SelectionPolicy policy,
             const std::string* agent_choice);

  ExpansionOutcome expand(int candidate_id);

  PruneSummary apply_restrictions(const RestrictionDelta& delta);

  Route extract_route(int candidate_id) const;

  double candidate_value(const Candidate& candidate);

  void log(const std::string& type, const std::string& detail);

  const Task& task() const { return task_; }
  const World& world() const { return *world_; }
  const SearchConfig& config() const { return config_; }

  ValueFunctionAst vf;
  RestrictionSet restrictions;
  int iteration = 0;
  std::vector<Candidate> candidates;          // all ever created; id == index
  std::vector<RejectedRoute> rejected_routes;
  std::vector<EventRecord> events;

private:
  Task task_;
  const World* world_;
  SearchConfig config_;
  std::set<std::string> seen_keys_;  // live candidate identities
};

/// Full planning loop for one task. `backend` may be null for systems that
/// never consult an agent; `preset` seeds the restriction set (staticreg).
PlanResult run(const Task& task, const World& world, const SearchConfig& config,
               LlmBackend* backend = nullptr,
               const RestrictionSet* preset = nullptr);

/// Plain-system loop that keeps collecting distinct completed routes until
/// the budget ends, the frontier empties, or max_routes are found.
std::vector<Route> collect_routes(const Task& task, const World& world,
                                  const SearchConfig& config,
                                  std::size_t max_routes,
                                  const RestrictionSet* preset = nullptr);

}  // namespace mmorf
