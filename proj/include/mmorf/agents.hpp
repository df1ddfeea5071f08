#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mmorf/restrictions.hpp"
#include "mmorf/vfdsl.hpp"

namespace mmorf {

enum class Role { coordinator, navigator, regulator, verifier };
const char* role_name(Role role);

// ---------------------------------------------------------------------------
// Action grammar
// ---------------------------------------------------------------------------

struct SetValueFunctionAction { std::string text; };
struct FinalizeAction {};
struct RestrictMoleculesAction { std::vector<std::string> molecules; };
struct RestrictSpecificReactionsAction { std::vector<std::string> reactions; };
struct RestrictReactionTemplatesAction { std::vector<std::string> patterns; };
struct DepthLimitAction { int depth = -1; };
struct UnrestrictMoleculesAction { std::vector<std::string> molecules; };
struct UnrestrictSpecificReactionAction { std::string reaction; };
struct UnrestrictReactionTemplateAction { std::string pattern; };
struct AcceptProposedAction { std::string reason; };
struct RejectAction { std::string feedback; };
struct AcceptPreviousAction { int id = 0; std::string reason; };
struct PruningAction { std::string instructions; };
struct ValueFnAction { std::string instructions; };
struct ExpandDefaultAction { int n = 1; };
struct ExpandAction { std::string id; };

using AgentAction = std::variant<
    SetValueFunctionAction, FinalizeAction, RestrictMoleculesAction,
    RestrictSpecificReactionsAction, RestrictReactionTemplatesAction,
    DepthLimitAction, UnrestrictMoleculesAction, UnrestrictSpecificReactionAction,
    UnrestrictReactionTemplateAction, AcceptProposedAction, RejectAction,
    AcceptPreviousAction, PruningAction, ValueFnAction, ExpandDefaultAction,
    ExpandAction>;

std::string action_name(const AgentAction& action);

/// Canonical `Name(args)` form, the payload of an Action: line.
std::string render_action(const AgentAction& action);

const std::vector<std::string>& allowed_actions_for(Role role);

/// Scans for the last "Action:" line, extracts the backtick-wrapped call
/// and parses it. A trailing <PAUSE> is tolerated but not required.
AgentAction parse_action(std::string_view text,
                         const std::vector<std::string>& allowed);

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

struct TemplateContext {
  std::map<std::string, std::string> scalars;
  std::map<std::string, long long> numbers;
  // list name -> items; each item maps loop placeholders to values
  std::map<std::string, std::vector<std::map<std::string, std::string>>> lists;
};

/// Template ids: {coordinator,navigator,regulator,verifier}_system and
/// coordinator_delegate, navigator_turn, regulator_turn, verifier_judgment.
std::string render_prompt(const std::string& template_id, const TemplateContext& ctx);

// ---------------------------------------------------------------------------
// Language-model backends
// ---------------------------------------------------------------------------

class LlmBackend {
public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(Role role, const std::string& system_text,
                               const std::string& prompt_text) = 0;
};

struct ScenarioEntry {
  Role role = Role::verifier;
  std::optional<std::string> match;  // substring of the prompt
  std::string response;
};

class ScriptedBackend : public LlmBackend {
public:
  explicit ScriptedBackend(std::vector<ScenarioEntry> entries);
  static ScriptedBackend from_file(const std::string& path);
  static ScriptedBackend from_json_text(const std::string& text);

  std::string complete(Role role, const std::string& system_text,
                       const std::string& prompt_text) override;

  std::size_t consumed() const { return consumed_count_; }

private:
  std::vector<ScenarioEntry> entries_;
  std::vector<bool> used_;
  std::size_t consumed_count_ = 0;
};

/// Deterministic built-in policies, a pure function of the prompt text.
/// The policy table is documented in the README.
class RuleBackend : public LlmBackend {
public:
  std::string complete(Role role, const std::string& system_text,
                       const std::string& prompt_text) override;
};

struct HttpBackendConfig {
  std::string base_url;   // e.g. http://host:port/v1
  std::string api_key;
  std::string model;
  int timeout_seconds = 60;
  int retries = 2;
  int backoff_ms = 500;

  static HttpBackendConfig from_env();
};

class HttpBackend : public LlmBackend {
public:
  explicit HttpBackend(HttpBackendConfig config);
  std::string complete(Role role, const std::string& system_text,
                       const std::string& prompt_text) override;

private:
  HttpBackendConfig config_;
};

/// Creates a fresh backend per task from a spec string:
/// "rule", "scripted:<path>" or "http".
using BackendFactory = std::function<std::unique_ptr<LlmBackend>()>;
BackendFactory make_backend_factory(const std::string& spec);

// ---------------------------------------------------------------------------
// Sessions
// ---------------------------------------------------------------------------

struct AgentConfig {
  int turn_limit = 3;
  int parse_retries_per_turn = 1;
};

struct LlmExchange {
  Role role;
  std::string system;
  std::string prompt;
  std::string reply;
};

/// Optional sink for transcripts and session-level events.
struct Trace {
  std::vector<LlmExchange>* transcript = nullptr;
  std::function<void(const std::string& type, const std::string& detail)> event;

  void record(Role role, const std::string& system, const std::string& prompt,
              const std::string& reply) const {
    if (transcript) transcript->push_back({role, system, prompt, reply});
  }
  void note(const std::string& type, const std::string& detail) const {
    if (event) event(type, detail);
  }
};

struct CandidateView {
  std::string id;
  RouteState state;
  double value = 0.0;
  std::string report_json;
};

struct NavigatorInput {
  std::string product;
  std::string instructions;
  std::vector<CandidateView> candidates;
  ValueFunctionAst current_vf;
  const World* world = nullptr;
};

ValueFunctionAst navigator_session(const NavigatorInput& input,
                                   const AgentConfig& config, LlmBackend& backend,
                                   const Trace& trace);

struct RegulatorInput {
  std::string product;
  std::string instructions;
  std::vector<std::string> route_report_jsons;  // candidate or rejected routes
  std::vector<Route> routes;                    // parallel to the reports
  RestrictionSet current;
};

RestrictionDelta regulator_session(const RegulatorInput& input,
                                   const AgentConfig& config, LlmBackend& backend,
                                   const Trace& trace);

struct Verdict {
  enum class Decision { accept_proposed, reject, accept_previous };
  Decision decision = Decision::accept_proposed;
  int previous_id = 0;  // 1-based index into the rejected history
  std::string reason_or_feedback;
};

struct VerifierInput {
  std::string product;
  std::string task_instructions;
  std::string proposed_report_json;
  std::vector<std::string> rejected_report_jsons;  // full history, oldest first
  int remaining_iterations = 0;
};

Verdict verify_route(const VerifierInput& input, const AgentConfig& config,
                     LlmBackend& backend, const Trace& trace);

struct CoordinatorInput {
  std::string product;
  std::string task_instruction;
  std::vector<CandidateView> candidates;
  std::vector<std::string> previous_actions;
  std::string restrictions_json;
  std::string value_function;
};

AgentAction coordinator_delegate(const CoordinatorInput& input,
                                 const AgentConfig& config, LlmBackend& backend,
                                 const Trace& trace);

}  // namespace mmorf
