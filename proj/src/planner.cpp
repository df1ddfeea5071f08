#include "mmorf/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>

namespace mmorf {

using nlohmann::json;

SystemKind system_from_string(const std::string& name) {
  if (name == "plain") return SystemKind::plain;
  if (name == "masil") return SystemKind::masil;
  if (name == "rfas") return SystemKind::rfas;
  if (name == "staticreg") return SystemKind::staticreg;
  raise(Errc::unknown_system, "'" + name + "'");
}

const char* system_name(SystemKind kind) {
  switch (kind) {
    case SystemKind::plain: return "plain";
    case SystemKind::masil: return "masil";
    case SystemKind::rfas: return "rfas";
    case SystemKind::staticreg: return "staticreg";
  }
  return "?";
}

const char* plan_status_name(PlanStatus status) {
  switch (status) {
    case PlanStatus::solved: return "solved";
    case PlanStatus::failed_budget: return "failed_budget";
    case PlanStatus::failed_exhausted: return "failed_exhausted";
  }
  return "?";
}

PlanStatus plan_status_from_string(const std::string& name) {
  if (name == "solved") return PlanStatus::solved;
  if (name == "failed_budget") return PlanStatus::failed_budget;
  if (name == "failed_exhausted") return PlanStatus::failed_exhausted;
  raise(Errc::schema_violation, "unknown status '" + name + "'");
}

RouteState Candidate::route_state() const {
  RouteState state;
  state.reactions = reaction_keys;
  for (const OpenLeaf& leaf : open) state.frontier.push_back(leaf.molecule);
  return state;
}

std::string Candidate::key() const {
  std::vector<std::string> sorted = reaction_keys;
  std::sort(sorted.begin(), sorted.end());
  std::string out;
  for (const std::string& k : sorted) {
    out += k;
    out += '\n';
  }
  return out;
}

SearchState::SearchState(const Task& task, const World& world,
                         const SearchConfig& config, const RestrictionSet* preset)
    : task_(task), world_(&world), config_(config) {
  if (!is_canonical_molecule(task.product)) {
    raise(Errc::invalid_argument,
          "task product '" + task.product + "' is not a canonical molecule");
  }
  if (world.purchasable(task.product)) {
    raise(Errc::purchasable_target,
          "'" + task.product + "' is already a building block");
  }
  vf = parse_vf("Synth()");
  if (preset) restrictions = *preset;

  Candidate root;
  root.id = 0;
  root.open.push_back(OpenLeaf{task_.product, 0, {}});
  candidates.push_back(std::move(root));
  seen_keys_.insert(candidates[0].key());
  log("init", "system=" + std::string(system_name(config_.system)) +
                  " target=" + task_.product);
}

void SearchState::log(const std::string& type, const std::string& detail) {
  events.push_back(EventRecord{iteration, type, detail});
}

double SearchState::candidate_value(const Candidate& candidate) {
  try {
    return evaluate_vf(vf, candidate.route_state(), *world_);
  } catch (const Error& e) {
    if (e.code() == Errc::division_by_zero) {
      log("warning", "value function on " + candidate.label() + ": " + e.what());
      return -std::numeric_limits<double>::infinity();
    }
    throw;
  }
}

std::vector<int> SearchState::simulate(int k) {
  if (k < 1) raise(Errc::invalid_argument, "k must be >= 1");
  struct Ranked {
    int id;
    double value;
  };
  std::vector<Ranked> ranked;
  for (const Candidate& c : candidates) {
    if (!c.alive || c.open.empty()) continue;
    bool blocked = false;
    for (std::size_t i = 0; i < c.reactions.size() && !blocked; ++i) {
      if (restrictions.blocks_reaction(c.reactions[i], c.reaction_keys[i], c.depths[i])) {
        blocked = true;
      }
    }
    for (const OpenLeaf& leaf : c.open) {
      if (blocked) break;
      if (restrictions.blocks_molecule(leaf.molecule)) blocked = true;
    }
    if (blocked) continue;
    ranked.push_back(Ranked{c.id, candidate_value(candidates[c.id])});
  }
  if (ranked.empty()) raise(Errc::frontier_empty, "no expandable candidates remain");
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.id < b.id;
  });
  std::vector<int> out;
  for (const Ranked& r : ranked) {
    if (static_cast<int>(out.size()) >= k) break;
    out.push_back(r.id);
  }
  return out;
}

int SearchState::select(const std::vector<int>& candidate_ids, SelectionPolicy policy,
                        const std::string* agent_choice) {
  if (candidate_ids.empty()) raise(Errc::invalid_argument, "no candidates to select");
  if (policy == SelectionPolicy::agentic && agent_choice) {
    for (int id : candidate_ids) {
      if (candidates[id].label() == *agent_choice) return id;
    }
    log("select_fallback", "unknown candidate id '" + *agent_choice + "'");
  }
  return candidate_ids[0];
}

ExpansionOutcome SearchState::expand(int candidate_id) {
  // copy: growing `candidates` below would invalidate a reference
  const Candidate parent = candidates[candidate_id];
  if (!parent.alive || parent.open.empty()) {
    raise(Errc::invalid_argument, parent.label() + " is not expandable");
  }

  // Hardest open molecule first (largest synth_cost), leftmost on ties.
  std::size_t pick = 0;
  double best_cost = -1.0;
  for (std::size_t i = 0; i < parent.open.size(); ++i) {
    double cost = annotate(*world_, parent.open[i].molecule).synth_cost;
    if (cost > best_cost) {
      best_cost = cost;
      pick = i;
    }
  }
  OpenLeaf leaf = parent.open[pick];
  int reaction_depth = leaf.depth + 1;

  std::set<std::string> used;  // non-purchasable molecules already in the route
  used.insert(task_.product);
  for (const Reaction& r : parent.reactions) {
    for (const std::string& m : r.reactants) {
      if (!world_->purchasable(m)) used.insert(m);
    }
  }

  ExpansionOutcome outcome;
  for (const ScoredReaction& sr : expand_retro(*world_, leaf.molecule,
                                               config_.branching)) {
    if (restrictions.blocks_reaction(sr.reaction, sr.canonical, reaction_depth)) {
      continue;
    }
    bool invalid = false;
    for (const std::string& reactant : sr.reaction.reactants) {
      if (reactant == leaf.molecule) invalid = true;
      if (std::find(leaf.ancestors.begin(), leaf.ancestors.end(), reactant) !=
          leaf.ancestors.end()) {
        invalid = true;
      }
      if (!world_->purchasable(reactant) && used.count(reactant)) invalid = true;
      if (invalid) break;
    }
    if (invalid) continue;

    Candidate child;
    child.reactions = parent.reactions;
    child.reaction_keys = parent.reaction_keys;
    child.depths = parent.depths;
    child.open = parent.open;
    child.reactions.push_back(sr.reaction);
    child.reaction_keys.push_back(sr.canonical);
    child.depths.push_back(reaction_depth);

    std::vector<OpenLeaf> fresh;
    std::vector<std::string> ancestors = leaf.ancestors;
    ancestors.push_back(leaf.molecule);
    for (const std::string& reactant : sr.reaction.reactants) {
      if (world_->purchasable(reactant)) continue;
      fresh.push_back(OpenLeaf{reactant, reaction_depth, ancestors});
    }
    child.open.erase(child.open.begin() + static_cast<long>(pick));
    child.open.insert(child.open.begin() + static_cast<long>(pick), fresh.begin(),
                      fresh.end());

    std::string key = child.key();
    if (seen_keys_.count(key)) continue;
    seen_keys_.insert(key);
    child.id = static_cast<int>(candidates.size());
    bool complete = child.open.empty();
    if (complete) child.alive = false;
    int child_id = child.id;
    candidates.push_back(std::move(child));
    ++outcome.children;
    if (complete) outcome.completed.push_back(child_id);
  }

  candidates[candidate_id].alive = false;
  return outcome;
}

PruneSummary SearchState::apply_restrictions(const RestrictionDelta& delta) {
  merge_delta(restrictions, delta);
  PruneSummary summary;
  for (Candidate& c : candidates) {
    if (!c.alive || c.open.empty()) continue;
    bool violates = false;
    for (std::size_t i = 0; i < c.reactions.size() && !violates; ++i) {
      if (restrictions.blocks_reaction(c.reactions[i], c.reaction_keys[i], c.depths[i])) {
        violates = true;
      }
    }
    for (const OpenLeaf& leaf : c.open) {
      if (violates) break;
      if (restrictions.blocks_molecule(leaf.molecule)) violates = true;
    }
    if (violates) {
      c.alive = false;
      seen_keys_.erase(c.key());  // permits later re-derivation
      ++summary.pruned;
    }
  }
  return summary;
}

Route SearchState::extract_route(int candidate_id) const {
  const Candidate& c = candidates[candidate_id];
  if (!c.open.empty()) {
    raise(Errc::incomplete_assignment,
          c.label() + " still has " + std::to_string(c.open.size()) + " open leaves");
  }
  return c.reactions;
}

namespace {

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

std::vector<CandidateView> make_views(SearchState& state, const std::vector<int>& ids) {
  std::vector<CandidateView> views;
  for (int id : ids) {
    const Candidate& c = state.candidates[id];
    CandidateView view;
    view.id = c.label();
    view.state = c.route_state();
    view.value = state.candidate_value(state.candidates[id]);
    view.report_json =
        partial_report_json(view.id, view.state, view.value, state.world()).dump();
    views.push_back(std::move(view));
  }
  return views;
}

}  // namespace

PlanResult run(const Task& task, const World& world, const SearchConfig& config,
               LlmBackend* backend, const RestrictionSet* preset) {
  if (config.i_max < 0 || config.i_init > config.i_max || config.k_candidates < 1 ||
      config.branching < 1) {
    raise(Errc::invalid_argument, "invalid search configuration");
  }
  bool uses_agents = config.return_policy == ReturnPolicy::verified ||
                     config.system == SystemKind::masil ||
                     config.system == SystemKind::rfas;
  if (uses_agents && !backend) {
    raise(Errc::invalid_argument,
          std::string(system_name(config.system)) + " needs an llm backend");
  }

  Clock clock;
  PlanResult result;
  result.task_id = task.id;

  SearchState state(task, world, config, preset);
  Trace trace;
  trace.transcript = &result.transcript;
  trace.event = [&state](const std::string& type, const std::string& detail) {
    state.log(type, detail);
  };

  std::set<std::string> reported;
  std::vector<std::string> coordinator_actions;
  std::vector<std::string> feedback_notes;
  int default_budget = 0;

  auto task_context = [&]() {
    std::string text = task_context_text(task);
    if (!feedback_notes.empty()) {
      text += "\nVerifier feedback so far:";
      for (const std::string& f : feedback_notes) text += "\n - " + f;
    }
    return text;
  };

  auto finish = [&](PlanStatus status) {
    result.status = status;
    result.iterations_used = state.iteration;
    result.wall_seconds = clock.seconds();
    result.event_log = state.events;
    result.rejected_routes = state.rejected_routes;
    return result;
  };

  for (;;) {
    if (state.iteration >= config.i_max) {
      state.log("budget_exhausted", "iteration limit " + std::to_string(config.i_max));
      return finish(PlanStatus::failed_budget);
    }
    if (clock.seconds() >= static_cast<double>(config.time_limit_seconds)) {
      state.log("budget_exhausted",
                "time limit " + std::to_string(config.time_limit_seconds) + "s");
      return finish(PlanStatus::failed_budget);
    }

    std::vector<int> sim;
    try {
      sim = state.simulate(config.k_candidates);
    } catch (const Error& e) {
      if (e.code() == Errc::frontier_empty) {
        state.log("frontier_empty", e.what());
        return finish(PlanStatus::failed_exhausted);
      }
      throw;
    }
    state.iteration += 1;
    state.log("simulate", "candidates=" + std::to_string(sim.size()));

    const std::string* agent_choice = nullptr;
    std::string chosen_label;

    bool delegate_now = config.system == SystemKind::masil &&
                        state.iteration > config.i_init && backend != nullptr;
    if (delegate_now && default_budget > 0) {
      --default_budget;
      delegate_now = false;
    }
    if (delegate_now) {
      CoordinatorInput cin;
      cin.product = task.product;
      cin.task_instruction = task_context();
      cin.candidates = make_views(state, sim);
      cin.previous_actions = coordinator_actions;
      cin.restrictions_json = state.restrictions.to_json().dump();
      cin.value_function = render_vf(state.vf);
      AgentAction action = coordinator_delegate(cin, config.agent, *backend, trace);
      coordinator_actions.push_back(render_action(action));
      state.log("delegate", render_action(action));

      if (auto* pruning = std::get_if<PruningAction>(&action)) {
        RegulatorInput rin;
        rin.product = task.product;
        rin.instructions = pruning->instructions;
        for (std::size_t i = 0; i < cin.candidates.size(); ++i) {
          rin.route_report_jsons.push_back(cin.candidates[i].report_json);
          rin.routes.push_back(state.candidates[sim[i]].reactions);
        }
        rin.current = state.restrictions;
        RestrictionDelta delta = regulator_session(rin, config.agent, *backend, trace);
        PruneSummary summary = state.apply_restrictions(delta);
        state.log("prune", "pruned=" + std::to_string(summary.pruned));
        try {
          sim = state.simulate(config.k_candidates);
        } catch (const Error& e) {
          if (e.code() == Errc::frontier_empty) {
            state.log("frontier_empty", e.what());
            return finish(PlanStatus::failed_exhausted);
          }
          throw;
        }
      } else if (auto* valuefn = std::get_if<ValueFnAction>(&action)) {
        NavigatorInput nin;
        nin.product = task.product;
        nin.instructions = valuefn->instructions;
        nin.candidates = cin.candidates;
        nin.current_vf = state.vf;
        nin.world = &world;
        state.vf = navigator_session(nin, config.agent, *backend, trace);
        state.log("vf_update", render_vf(state.vf));
        sim = state.simulate(config.k_candidates);
      } else if (auto* expand_default = std::get_if<ExpandDefaultAction>(&action)) {
        int remaining = config.i_max - state.iteration;
        default_budget = std::clamp(expand_default->n, 1, std::max(1, remaining));
      } else if (auto* expand_choice = std::get_if<ExpandAction>(&action)) {
        chosen_label = expand_choice->id;
        agent_choice = &chosen_label;
      }
    }

    int chosen = state.select(sim, config.selection_policy, agent_choice);
    state.log("select", state.candidates[chosen].label());

    ExpansionOutcome outcome = state.expand(chosen);
    state.log("expand", state.candidates[chosen].label() + " children=" +
                            std::to_string(outcome.children));

    for (int completed_id : outcome.completed) {
      Route route = state.extract_route(completed_id);
      std::string key = route_key(route);
      if (!reported.insert(key).second) continue;
      RouteReport report = route_metrics(route, world, config.smp_per_occurrence);
      state.log("route_completed", state.candidates[completed_id].label() +
                                       " rl=" + std::to_string(report.rl));

      if (config.return_policy == ReturnPolicy::first_found) {
        result.route = route;
        result.report = report;
        state.log("accept", "first_found");
        return finish(PlanStatus::solved);
      }

      VerifierInput vin;
      vin.product = task.product;
      vin.task_instructions = task_context_text(task);
      vin.proposed_report_json = report.to_json().dump();
      for (const RejectedRoute& r : state.rejected_routes) {
        vin.rejected_report_jsons.push_back(r.report.to_json().dump());
      }
      vin.remaining_iterations = config.i_max - state.iteration;
      Verdict verdict = verify_route(vin, config.agent, *backend, trace);

      if (verdict.decision == Verdict::Decision::accept_proposed) {
        state.log("accept", verdict.reason_or_feedback);
        result.route = route;
        result.report = report;
        return finish(PlanStatus::solved);
      }
      if (verdict.decision == Verdict::Decision::accept_previous) {
        const RejectedRoute& prev =
            state.rejected_routes[static_cast<std::size_t>(verdict.previous_id - 1)];
        state.log("accept_previous", "id=" + std::to_string(verdict.previous_id) +
                                         " " + verdict.reason_or_feedback);
        result.route = prev.route;
        result.report = prev.report;
        return finish(PlanStatus::solved);
      }

      state.log("reject", verdict.reason_or_feedback);
      state.rejected_routes.push_back(
          RejectedRoute{route, report, verdict.reason_or_feedback});

      if (config.system == SystemKind::masil) {
        feedback_notes.push_back(verdict.reason_or_feedback);
      } else if (config.system == SystemKind::rfas) {
        RegulatorInput rin;
        rin.product = task.product;
        rin.instructions = verdict.reason_or_feedback;
        for (const RejectedRoute& r : state.rejected_routes) {
          rin.route_report_jsons.push_back(r.report.to_json().dump());
          rin.routes.push_back(r.route);
        }
        rin.current = state.restrictions;
        RestrictionDelta delta = regulator_session(rin, config.agent, *backend, trace);
        PruneSummary summary = state.apply_restrictions(delta);
        state.log("prune", "pruned=" + std::to_string(summary.pruned));
      }
    }
  }
}

std::vector<Route> collect_routes(const Task& task, const World& world,
                                  const SearchConfig& config, std::size_t max_routes,
                                  const RestrictionSet* preset) {
  Clock clock;
  SearchState state(task, world, config, preset);
  std::set<std::string> seen;
  std::vector<Route> routes;
  while (routes.size() < max_routes) {
    if (state.iteration >= config.i_max) break;
    if (clock.seconds() >= static_cast<double>(config.time_limit_seconds)) break;
    std::vector<int> sim;
    try {
      sim = state.simulate(config.k_candidates);
    } catch (const Error& e) {
      if (e.code() == Errc::frontier_empty) break;
      throw;
    }
    state.iteration += 1;
    int chosen = state.select(sim, SelectionPolicy::value, nullptr);
    ExpansionOutcome outcome = state.expand(chosen);
    for (int completed_id : outcome.completed) {
      Route route = state.extract_route(completed_id);
      if (!seen.insert(route_key(route)).second) continue;
      routes.push_back(std::move(route));
      if (routes.size() >= max_routes) break;
    }
  }
  return routes;
}

namespace {

std::string iso_timestamp() {
  std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

json route_to_json(const Route& route) {
  json out = json::array();
  for (const Reaction& r : route) out.push_back(canonicalize_reaction(r));
  return out;
}

Route route_from_json(const json& j) {
  Route route;
  for (const json& s : j) route.push_back(parse_reaction(s.get<std::string>()));
  return route;
}

}  // namespace

json PlanResult::to_json() const {
  json j;
  j["task"] = task_id;
  j["status"] = plan_status_name(status);
  j["route"] = route ? route_to_json(*route) : json();
  j["report"] = report ? report->to_json() : json();
  j["iterations_used"] = iterations_used;
  j["wall_seconds"] = wall_seconds;
  json rejected = json::array();
  for (const RejectedRoute& r : rejected_routes) {
    rejected.push_back(json{{"route", route_to_json(r.route)},
                            {"report", r.report.to_json()},
                            {"feedback", r.feedback}});
  }
  j["rejected_routes"] = rejected;
  json events = json::array();
  for (const EventRecord& e : event_log) {
    events.push_back(
        json{{"iteration", e.iteration}, {"type", e.type}, {"detail", e.detail}});
  }
  j["event_log"] = events;
  j["timestamp"] = iso_timestamp();
  return j;
}

PlanResult plan_result_from_json(const json& j) {
  PlanResult result;
  result.task_id = j.at("task").get<std::string>();
  result.status = plan_status_from_string(j.at("status").get<std::string>());
  if (j.contains("route") && !j.at("route").is_null()) {
    result.route = route_from_json(j.at("route"));
  }
  if (j.contains("report") && !j.at("report").is_null()) {
    result.report = report_from_json(j.at("report"));
  }
  result.iterations_used = j.value("iterations_used", 0);
  result.wall_seconds = j.value("wall_seconds", 0.0);
  if (j.contains("rejected_routes")) {
    for (const json& r : j.at("rejected_routes")) {
      RejectedRoute rr;
      rr.route = route_from_json(r.at("route"));
      rr.report = report_from_json(r.at("report"));
      rr.feedback = r.value("feedback", "");
      result.rejected_routes.push_back(std::move(rr));
    }
  }
  if (j.contains("event_log")) {
    for (const json& e : j.at("event_log")) {
      result.event_log.push_back(EventRecord{e.value("iteration", 0),
                                             e.value("type", ""),
                                             e.value("detail", "")});
    }
  }
  return result;
}

}  // namespace mmorf
