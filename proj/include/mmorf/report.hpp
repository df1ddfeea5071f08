#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmorf/chemworld.hpp"
#include "mmorf/tasks.hpp"
#include "mmorf/vfdsl.hpp"

namespace mmorf {

/// Multi-objective record for one complete route. All five headline
/// objectives are minimized.
struct RouteReport {
  double carc = 0.0;   // max carc_score over all route molecules
  int pyro = 0;        // 1 if any molecule is predicted pyrophoric
  int ghs_count = 0;   // |union of GHS codes over all molecules|
  std::set<std::string> ghs_codes;
  double smp = 0.0;    // starting-material price total
  int rl = 0;          // number of reactions
  std::vector<std::string> reactions;          // canonical, root first
  std::vector<std::string> starting_materials; // unique, sorted
  std::map<std::string, MoleculeProfile> molecules;

  nlohmann::json to_json() const;
};

RouteReport report_from_json(const nlohmann::json& j);

struct ValidityVerdict {
  bool valid = false;
  std::vector<std::string> reasons;  // reason codes, e.g. "UnpurchasableLeaf"
};

/// A route is valid when it is a nonempty, acyclic tree connecting the
/// target to purchasable leaves, each intermediate is produced exactly once
/// and consumed upstream, and every reaction passes feasibility_check.
ValidityVerdict validate_route(const Route& route, const World& world);

/// True when the reaction is among the top 5 predicted reactions for its
/// product, by plausibility.
bool feasibility_check(const Reaction& reaction, const World& world);

/// Hook for an external route-level reaction judge; no implementation is
/// bundled.
class ReactionJudge {
public:
  virtual ~ReactionJudge() = default;
  virtual bool judge(const Reaction& reaction, const World& world) = 0;
};

/// Requires a valid route. Set smp_per_occurrence to count a starting
/// material once per leaf use instead of once per unique molecule.
RouteReport build_report(const Route& route, const World& world,
                         bool smp_per_occurrence = false);

/// Same metrics without the validity gate; used for tooling reports on
/// routes the planner is still judging.
RouteReport route_metrics(const Route& route, const World& world,
                          bool smp_per_occurrence = false);

/// Report-shaped JSON for a partial route (prompt rendering); never throws
/// on incomplete assignments.
nlohmann::json partial_report_json(const std::string& id, const RouteState& state,
                                   double value, const World& world);

struct ConstraintViolation {
  Constraint::Type type;
  std::vector<std::string> molecules;
};

struct ConstraintResult {
  bool satisfied = true;
  std::vector<ConstraintViolation> violations;
};

/// Ground-truth constraint check (used for success-rate scoring).
ConstraintResult check_constraints(const Route& route,
                                   const std::vector<Constraint>& constraints,
                                   const World& world);

/// a <= b on (carc, pyro, ghs_count, smp, rl) with at least one strict <.
bool dominates(const RouteReport& a, const RouteReport& b);
bool dominates_or_equal(const RouteReport& a, const RouteReport& b);

/// Indices of reports not dominated by any other; duplicates all kept.
std::vector<std::size_t> pareto_front(const std::vector<RouteReport>& reports);

/// Exhaustive enumeration of all valid routes for `product` with branch
/// depth <= max_depth. Deterministic order: shortest first, then by
/// canonical route key.
std::vector<Route> brute_force_routes(const World& world, const std::string& product,
                                      int max_depth,
                                      std::size_t node_cap = 1000000);

std::string route_key(const Route& route);

}  // namespace mmorf
