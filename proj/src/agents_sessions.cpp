#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "mmorf/agents.hpp"
#include "mmorf/report.hpp"

namespace mmorf {

namespace {

double safe_value(const ValueFunctionAst& vf, const RouteState& state,
                  const World& world, const Trace& trace) {
  try {
    return evaluate_vf(vf, state, world);
  } catch (const Error& e) {
    if (e.code() == Errc::division_by_zero) {
      trace.note("warning", std::string("value function error: ") + e.what());
      return -std::numeric_limits<double>::infinity();
    }
    throw;
  }
}

std::map<std::string, std::string> item(std::initializer_list<
                                        std::pair<const std::string, std::string>>
                                            kv) {
  return std::map<std::string, std::string>(kv);
}

}  // namespace

ValueFunctionAst navigator_session(const NavigatorInput& input,
                                   const AgentConfig& config, LlmBackend& backend,
                                   const Trace& trace) {
  const std::string system = render_prompt("navigator_system", {});
  ValueFunctionAst result = input.current_vf;
  std::vector<CandidateView> candidates = input.candidates;
  std::vector<std::string> previous_actions;
  std::string previous_output;

  for (int turn = 1; turn <= config.turn_limit; ++turn) {
    long long remaining = config.turn_limit - turn + 1;
    bool acted = false;
    for (int attempt = 0; attempt <= config.parse_retries_per_turn && !acted;
         ++attempt) {
      TemplateContext ctx;
      ctx.scalars["PRODUCT"] = input.product;
      ctx.scalars["INSTRUCTION_FROM_COORDINATOR"] = input.instructions;
      ctx.scalars["VALUE_FUNCTION"] = render_vf(result);
      ctx.scalars["PREVIOUS_OUTPUT"] = previous_output;
      ctx.numbers["SHOW_PREVIOUS"] = previous_output.empty() ? 0 : 1;
      ctx.numbers["REMAINING_TURNS"] = remaining;
      std::vector<std::map<std::string, std::string>> list;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        list.push_back(item({{"IDX", std::to_string(i)},
                             {"CANDIDATE_ROUTE_REPORT", candidates[i].report_json}}));
      }
      ctx.lists["CANDIDATES"] = std::move(list);
      std::vector<std::map<std::string, std::string>> acts;
      for (const std::string& a : previous_actions) {
        acts.push_back(item({{"ACT", a}}));
      }
      ctx.lists["PREVIOUS_ACTIONS"] = std::move(acts);

      std::string prompt = render_prompt("navigator_turn", ctx);
      std::string text = backend.complete(Role::navigator, system, prompt);
      trace.record(Role::navigator, system, prompt, text);

      try {
        AgentAction action = parse_action(text, allowed_actions_for(Role::navigator));
        if (std::holds_alternative<FinalizeAction>(action)) {
          trace.note("navigator_finalize", render_vf(result));
          return result;
        }
        const auto& set = std::get<SetValueFunctionAction>(action);
        ValueFunctionAst ast = parse_vf(set.text);
        result = ast;
        for (CandidateView& c : candidates) {
          c.value = safe_value(ast, c.state, *input.world, trace);
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const CandidateView& a, const CandidateView& b) {
                           return a.value > b.value;
                         });
        for (CandidateView& c : candidates) {
          c.report_json =
              partial_report_json(c.id, c.state, c.value, *input.world).dump();
        }
        previous_output = "Value function updated to `" + render_vf(ast) +
                          "`. The candidate routes above are reranked under the "
                          "new value function.";
        previous_actions.push_back(render_action(action));
        trace.note("navigator_set_vf", render_vf(ast));
        acted = true;
      } catch (const Error& e) {
        previous_output = std::string("Error: ") + e.what();
        trace.note("navigator_error", e.what());
      }
    }
  }
  return result;
}

RestrictionDelta regulator_session(const RegulatorInput& input,
                                   const AgentConfig& config, LlmBackend& backend,
                                   const Trace& trace) {
  const std::string system = render_prompt("regulator_system", {});
  RestrictionSet preview = input.current;
  RestrictionDelta delta;
  std::vector<std::string> previous_actions;
  std::string previous_output;

  auto contains = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  auto erase_item = [](std::vector<std::string>& v, const std::string& s) {
    v.erase(std::remove(v.begin(), v.end(), s), v.end());
  };

  auto surviving_summary = [&]() {
    std::string out = "Restrictions updated to " + preview.to_json().dump() + ".";
    if (!input.routes.empty()) {
      std::string kept, pruned;
      for (std::size_t i = 0; i < input.routes.size(); ++i) {
        std::string idx = std::to_string(i + 1);
        if (preview.blocks_route(input.routes[i])) {
          pruned += pruned.empty() ? idx : ", " + idx;
        } else {
          kept += kept.empty() ? idx : ", " + idx;
        }
      }
      out += " Routes still permitted: [" + kept + "]; routes pruned: [" + pruned + "].";
    }
    return out;
  };

  for (int turn = 1; turn <= config.turn_limit; ++turn) {
    long long remaining = config.turn_limit - turn + 1;
    bool acted = false;
    for (int attempt = 0; attempt <= config.parse_retries_per_turn && !acted;
         ++attempt) {
      TemplateContext ctx;
      ctx.scalars["PRODUCT"] = input.product;
      ctx.scalars["INSTRUCTION_FROM_COORDINATOR_OR_VERIFIER"] = input.instructions;
      ctx.scalars["RESTRICTIONS"] = preview.to_json().dump();
      ctx.scalars["PREVIOUS_OUTPUT"] = previous_output;
      ctx.numbers["SHOW_PREVIOUS"] = previous_output.empty() ? 0 : 1;
      ctx.numbers["REMAINING_TURNS"] = remaining;
      std::vector<std::map<std::string, std::string>> list;
      for (std::size_t i = 0; i < input.route_report_jsons.size(); ++i) {
        list.push_back(item({{"IDX", std::to_string(i + 1)},
                             {"ROUTE_REPORT", input.route_report_jsons[i]}}));
      }
      ctx.lists["ROUTES"] = std::move(list);
      std::vector<std::map<std::string, std::string>> acts;
      for (const std::string& a : previous_actions) {
        acts.push_back(item({{"ACT", a}}));
      }
      ctx.lists["PREVIOUS_ACTIONS"] = std::move(acts);

      std::string prompt = render_prompt("regulator_turn", ctx);
      std::string text = backend.complete(Role::regulator, system, prompt);
      trace.record(Role::regulator, system, prompt, text);

      try {
        AgentAction action = parse_action(text, allowed_actions_for(Role::regulator));
        if (std::holds_alternative<FinalizeAction>(action)) {
          trace.note("regulator_finalize", "");
          return delta;
        }
        if (auto* rm = std::get_if<RestrictMoleculesAction>(&action)) {
          for (const std::string& m : rm->molecules) {
            if (!is_canonical_molecule(m)) {
              trace.note("warning", "skipping non-canonical molecule '" + m + "'");
              continue;
            }
            if (!contains(delta.add_molecules, m) && !preview.molecules.count(m)) {
              delta.add_molecules.push_back(m);
            }
            erase_item(delta.remove_molecules, m);
            preview.molecules.insert(m);
          }
        } else if (auto* rr = std::get_if<RestrictSpecificReactionsAction>(&action)) {
          for (const std::string& r : rr->reactions) {
            if (r.find(">>") == std::string::npos) {
              trace.note("warning", "skipping malformed reaction '" + r + "'");
              continue;
            }
            if (!contains(delta.add_reactions, r) && !preview.specific_reactions.count(r)) {
              delta.add_reactions.push_back(r);
            }
            erase_item(delta.remove_reactions, r);
            preview.specific_reactions.insert(r);
          }
        } else if (auto* rt = std::get_if<RestrictReactionTemplatesAction>(&action)) {
          for (const std::string& p : rt->patterns) {
            int vars = 0;
            for (const std::string& tok : molecule_tokens(p)) {
              if (tok == "$X" || tok == "*") ++vars;
            }
            if (p.empty() || vars > 1) {
              trace.note("warning", "skipping malformed pattern '" + p + "'");
              continue;
            }
            if (!contains(delta.add_patterns, p) && !preview.reaction_patterns.count(p)) {
              delta.add_patterns.push_back(p);
            }
            erase_item(delta.remove_patterns, p);
            preview.reaction_patterns.insert(p);
          }
        } else if (auto* dl = std::get_if<DepthLimitAction>(&action)) {
          if (dl->depth < -1 || dl->depth == 0) {
            trace.note("warning", "skipping depth limit " + std::to_string(dl->depth));
          } else {
            delta.depth_limit = dl->depth;
            preview.depth_limit = dl->depth;
          }
        } else if (auto* um = std::get_if<UnrestrictMoleculesAction>(&action)) {
          for (const std::string& m : um->molecules) {
            if (contains(delta.add_molecules, m)) {
              erase_item(delta.add_molecules, m);
              preview.molecules.erase(m);
            } else if (input.current.molecules.count(m)) {
              if (!contains(delta.remove_molecules, m)) delta.remove_molecules.push_back(m);
              preview.molecules.erase(m);
            } else {
              trace.note("warning", "molecule '" + m + "' was not restricted");
            }
          }
        } else if (auto* ur = std::get_if<UnrestrictSpecificReactionAction>(&action)) {
          const std::string& r = ur->reaction;
          if (contains(delta.add_reactions, r)) {
            erase_item(delta.add_reactions, r);
            preview.specific_reactions.erase(r);
          } else if (input.current.specific_reactions.count(r)) {
            if (!contains(delta.remove_reactions, r)) delta.remove_reactions.push_back(r);
            preview.specific_reactions.erase(r);
          } else {
            trace.note("warning", "reaction '" + r + "' was not restricted");
          }
        } else if (auto* ut = std::get_if<UnrestrictReactionTemplateAction>(&action)) {
          const std::string& p = ut->pattern;
          if (contains(delta.add_patterns, p)) {
            erase_item(delta.add_patterns, p);
            preview.reaction_patterns.erase(p);
          } else if (input.current.reaction_patterns.count(p)) {
            if (!contains(delta.remove_patterns, p)) delta.remove_patterns.push_back(p);
            preview.reaction_patterns.erase(p);
          } else {
            trace.note("warning", "pattern '" + p + "' was not restricted");
          }
        }
        previous_output = surviving_summary();
        previous_actions.push_back(render_action(action));
        trace.note("regulator_action", render_action(action));
        acted = true;
      } catch (const Error& e) {
        previous_output = std::string("Error: ") + e.what();
        trace.note("regulator_error", e.what());
      }
    }
  }
  return delta;
}

Verdict verify_route(const VerifierInput& input, const AgentConfig& config,
                     LlmBackend& backend, const Trace& trace) {
  const std::string system = render_prompt("verifier_system", {});
  long long n = static_cast<long long>(input.rejected_report_jsons.size());

  TemplateContext ctx;
  ctx.scalars["PRODUCT"] = input.product;
  ctx.scalars["ROUTE_REPORT"] = input.proposed_report_json;
  ctx.scalars["TASK_INSTRUCTIONS"] = input.task_instructions;
  ctx.numbers["NUM_REJECTED_ROUTES"] = n;
  ctx.numbers["REMAINING_RETRO_ITERATIONS"] = input.remaining_iterations;
  std::vector<std::map<std::string, std::string>> rejected;
  std::size_t start = n > 3 ? static_cast<std::size_t>(n - 3) : 0;
  for (std::size_t i = start; i < input.rejected_report_jsons.size(); ++i) {
    rejected.push_back(item({{"IDX", std::to_string(i + 1)},
                             {"REJECTED_ROUTE_REPORT", input.rejected_report_jsons[i]}}));
  }
  ctx.lists["REJECTED"] = std::move(rejected);

  std::string prompt = render_prompt("verifier_judgment", ctx);

  for (int attempt = 0; attempt <= config.parse_retries_per_turn; ++attempt) {
    std::string text = backend.complete(Role::verifier, system, prompt);
    trace.record(Role::verifier, system, prompt, text);
    try {
      AgentAction action = parse_action(text, allowed_actions_for(Role::verifier));
      if (auto* accept = std::get_if<AcceptProposedAction>(&action)) {
        return Verdict{Verdict::Decision::accept_proposed, 0, accept->reason};
      }
      if (auto* reject = std::get_if<RejectAction>(&action)) {
        return Verdict{Verdict::Decision::reject, 0, reject->feedback};
      }
      const auto& prev = std::get<AcceptPreviousAction>(action);
      if (prev.id < 1 || prev.id > n) {
        raise(Errc::malformed_arguments,
              "AcceptPrevious id " + std::to_string(prev.id) + " out of range");
      }
      return Verdict{Verdict::Decision::accept_previous, prev.id, prev.reason};
    } catch (const Error& e) {
      trace.note("verifier_error", e.what());
    }
  }
  trace.note("verifier_fallback", "verifier-parse-fallback");
  return Verdict{Verdict::Decision::accept_proposed, 0, "verifier-parse-fallback"};
}

AgentAction coordinator_delegate(const CoordinatorInput& input,
                                 const AgentConfig& config, LlmBackend& backend,
                                 const Trace& trace) {
  const std::string system = render_prompt("coordinator_system", {});

  TemplateContext ctx;
  ctx.scalars["PRODUCT"] = input.product;
  ctx.scalars["TASK_INSTRUCTION"] = input.task_instruction;
  ctx.scalars["RESTRICTIONS"] = input.restrictions_json;
  ctx.scalars["VALUE_FUNCTION"] = "`" + input.value_function + "`";
  ctx.numbers["NUM_PREVIOUS_ACTIONS"] =
      static_cast<long long>(input.previous_actions.size());
  std::vector<std::map<std::string, std::string>> list;
  for (const CandidateView& c : input.candidates) {
    list.push_back(item({{"CANDIDATE_ROUTE_REPORT", c.report_json}}));
  }
  ctx.lists["CANDIDATES"] = std::move(list);
  std::vector<std::map<std::string, std::string>> acts;
  for (const std::string& a : input.previous_actions) {
    acts.push_back(item({{"ACTION", a}}));
  }
  ctx.lists["PREVIOUS_ACTIONS"] = std::move(acts);

  std::string prompt = render_prompt("coordinator_delegate", ctx);

  for (int attempt = 0; attempt <= config.parse_retries_per_turn; ++attempt) {
    std::string text = backend.complete(Role::coordinator, system, prompt);
    trace.record(Role::coordinator, system, prompt, text);
    try {
      return parse_action(text, allowed_actions_for(Role::coordinator));
    } catch (const Error& e) {
      trace.note("coordinator_error", e.what());
    }
  }
  trace.note("coordinator_fallback", "ExpandDefault(1)");
  return ExpandDefaultAction{1};
}

}  // namespace mmorf
