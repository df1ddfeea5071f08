#include <chrono>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "mmorf/agents.hpp"
#include "mmorf/report.hpp"

namespace mmorf {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<ScenarioEntry> entries)
    : entries_(std::move(entries)), used_(entries_.size(), false) {}

namespace {

Role role_from_string(const std::string& name) {
  if (name == "coordinator") return Role::coordinator;
  if (name == "navigator") return Role::navigator;
  if (name == "regulator") return Role::regulator;
  if (name == "verifier") return Role::verifier;
  raise(Errc::schema_violation, "unknown role '" + name + "'");
}

std::string read_file_or_fail(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::parse_error, "cannot open scenario '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

ScriptedBackend ScriptedBackend::from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    raise(Errc::parse_error, e.what());
  }
  if (!root.is_array()) raise(Errc::schema_violation, "scenario must be a JSON array");
  std::vector<ScenarioEntry> entries;
  for (const json& e : root) {
    ScenarioEntry entry;
    entry.role = role_from_string(e.at("role").get<std::string>());
    if (e.contains("match")) entry.match = e.at("match").get<std::string>();
    entry.response = e.at("response").get<std::string>();
    entries.push_back(std::move(entry));
  }
  return ScriptedBackend(std::move(entries));
}

ScriptedBackend ScriptedBackend::from_file(const std::string& path) {
  return from_json_text(read_file_or_fail(path));
}

std::string ScriptedBackend::complete(Role role, const std::string& /*system_text*/,
                                      const std::string& prompt_text) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (used_[i]) continue;
    if (entries_[i].role != role) continue;
    if (entries_[i].match && prompt_text.find(*entries_[i].match) == std::string::npos) {
      continue;
    }
    used_[i] = true;
    ++consumed_count_;
    return entries_[i].response;
  }
  raise(Errc::scenario_exhausted,
        std::string("no scripted reply left for role ") + role_name(role));
}

// ---------------------------------------------------------------------------
// Rule backend: deterministic policies, pure functions of the prompt text.
// ---------------------------------------------------------------------------

namespace {

std::string reply(const std::string& thought, const std::string& call) {
  return "Thought: " + thought + "\nAction: `" + call + "`<PAUSE>";
}

// The JSON payloads we render into prompts are single-line dumps, so the
// report is the remainder of the marker's line.
std::optional<json> json_after_marker(const std::string& prompt,
                                      const std::string& marker,
                                      std::size_t from = 0,
                                      std::size_t* line_end = nullptr) {
  std::size_t at = prompt.find(marker, from);
  if (at == std::string::npos) return std::nullopt;
  std::size_t begin = at + marker.size();
  std::size_t end = prompt.find('\n', begin);
  if (end == std::string::npos) end = prompt.size();
  if (line_end) *line_end = end;
  try {
    return json::parse(prompt.substr(begin, end - begin));
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

std::vector<std::string> parse_bracket_list(const std::string& text, std::size_t from) {
  std::vector<std::string> out;
  std::size_t open = text.find('[', from);
  if (open == std::string::npos) return out;
  std::size_t close = text.find(']', open);
  if (close == std::string::npos) return out;
  std::string inner = text.substr(open + 1, close - open - 1);
  std::string cur;
  auto push = [&]() {
    std::size_t b = cur.find_first_not_of(" \t");
    std::size_t e = cur.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
    cur.clear();
  };
  for (char c : inner) {
    if (c == ',') {
      push();
    } else {
      cur.push_back(c);
    }
  }
  push();
  return out;
}

struct ParsedMetrics {
  RouteReport report;
  bool ok = false;
};

ParsedMetrics metrics_from_json(const json& j) {
  ParsedMetrics out;
  try {
    out.report = report_from_json(j);
    out.ok = true;
  } catch (...) {
  }
  return out;
}

std::string rule_verifier(const std::string& prompt) {
  auto proposed = json_after_marker(prompt, "Proposed Route: ");
  if (!proposed) {
    return reply("no parsable route report found, accepting by default",
                 "AcceptProposed(\"no report available\")");
  }

  bool check_carc = prompt.find("avoid carcinogenic") != std::string::npos;
  bool check_pyro = prompt.find("avoid pyrophoric") != std::string::npos;
  std::vector<std::string> user_list;
  std::size_t user_at = prompt.find("avoid user-specified molecules:");
  if (user_at != std::string::npos) user_list = parse_bracket_list(prompt, user_at);

  std::vector<std::string> offenders;
  if (proposed->contains("molecules")) {
    const json& mols = proposed->at("molecules");
    for (auto it = mols.begin(); it != mols.end(); ++it) {
      const json& m = it.value();
      bool bad = false;
      if (check_carc && m.value("carc_alert", false)) bad = true;
      if (check_pyro && m.value("pyro", false)) bad = true;
      for (const std::string& u : user_list) {
        if (it.key() == u) bad = true;
      }
      if (bad) offenders.push_back(it.key());
    }
  }
  if (!offenders.empty()) {
    std::string list;
    for (std::size_t i = 0; i < offenders.size(); ++i) {
      if (i) list += ", ";
      list += offenders[i];
    }
    return reply("the route appears to violate a hard constraint",
                 "Reject(\"constraint violations; restrict molecules [" + list + "]\")");
  }

  // Compare against the rejected reports shown in the prompt, if any.
  ParsedMetrics mine = metrics_from_json(*proposed);
  std::vector<RouteReport> rejected;
  std::size_t cursor = 0;
  for (;;) {
    std::size_t line_end = 0;
    auto j = json_after_marker(prompt, "Rejected Route ", cursor, &line_end);
    std::size_t at = prompt.find("Rejected Route ", cursor);
    if (at == std::string::npos) break;
    cursor = line_end ? line_end : at + 1;
    if (!j) {
      // line shape is "Rejected Route N: {json}"; retry after the colon
      auto k = json_after_marker(prompt.substr(at), ": ");
      if (k) j = k;
    }
    if (j) {
      ParsedMetrics m = metrics_from_json(*j);
      if (m.ok) rejected.push_back(m.report);
    }
    if (line_end == 0) break;
  }
  if (!rejected.empty() && mine.ok) {
    bool better = false;
    for (const RouteReport& r : rejected) {
      if (dominates_or_equal(mine.report, r)) {
        better = true;
        break;
      }
    }
    if (!better) {
      return reply("the proposed route does not improve on earlier rejections",
                   "Reject(\"not better than previously rejected routes\")");
    }
    return reply("the proposed route matches or improves on a rejected route",
                 "AcceptProposed(\"improves on previously rejected routes\")");
  }
  return reply("no constraint violations detected",
               "AcceptProposed(\"meets the stated constraints\")");
}

std::string rule_regulator(const std::string& prompt) {
  if (prompt.find("Previous actions:") != std::string::npos) {
    return reply("the restrictions are in place", "Finalize()");
  }
  std::size_t at = prompt.find("restrict molecules [");
  if (at != std::string::npos) {
    std::vector<std::string> molecules = parse_bracket_list(prompt, at);
    std::vector<std::string> valid;
    for (const std::string& m : molecules) {
      if (is_canonical_molecule(m)) valid.push_back(m);
    }
    if (!valid.empty()) {
      std::string args;
      for (std::size_t i = 0; i < valid.size(); ++i) {
        if (i) args += ", ";
        args += "'" + valid[i] + "'";
      }
      return reply("restricting the molecules named in the feedback",
                   "RestrictMolecules(" + args + ")");
    }
  }
  return reply("nothing actionable in the feedback", "Finalize()");
}

std::string rule_navigator(const std::string& prompt) {
  if (prompt.find("Previous actions:") != std::string::npos) {
    return reply("the value function is set", "Finalize()");
  }
  return reply("weight safety hazards and building-block cost against synthesizability",
               "SetValueFunction(\"Synth() - 10*Pyro() - 10*FastCarc() - "
               "0.01*BBPrice()\")");
}

std::string rule_coordinator(const std::string& prompt) {
  bool has_history = prompt.find("Previous planning decisions") != std::string::npos;
  bool did_pruning = prompt.find("Pruning(") != std::string::npos;
  bool did_valuefn = prompt.find("ValueFn(") != std::string::npos;
  if (!has_history || !did_pruning) {
    return reply("start by tightening the search-space boundaries",
                 "Pruning(\"Remove molecules implicated in constraint violations or "
                 "verifier rejections; restrict molecules named in any feedback.\")");
  }
  if (!did_valuefn) {
    return reply("now rebalance the guidance function",
                 "ValueFn(\"Rebalance the value function toward safety and cost "
                 "objectives.\")");
  }
  return reply("configuration looks settled, continue planning", "ExpandDefault(50)");
}

}  // namespace

std::string RuleBackend::complete(Role role, const std::string& /*system_text*/,
                                  const std::string& prompt_text) {
  switch (role) {
    case Role::verifier: return rule_verifier(prompt_text);
    case Role::regulator: return rule_regulator(prompt_text);
    case Role::navigator: return rule_navigator(prompt_text);
    case Role::coordinator: return rule_coordinator(prompt_text);
  }
  raise(Errc::invalid_argument, "unknown role");
}

// ---------------------------------------------------------------------------
// HTTP backend (OpenAI-compatible chat completions)
// ---------------------------------------------------------------------------

HttpBackendConfig HttpBackendConfig::from_env() {
  HttpBackendConfig config;
  if (const char* v = std::getenv("MMORF_LLM_BASE_URL")) config.base_url = v;
  if (const char* v = std::getenv("MMORF_LLM_API_KEY")) config.api_key = v;
  if (const char* v = std::getenv("MMORF_LLM_MODEL")) config.model = v;
  return config;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) {
    raise(Errc::invalid_argument, "http backend needs MMORF_LLM_BASE_URL");
  }
}

namespace {

struct SplitUrl {
  std::string host_port;  // scheme://host[:port]
  std::string path_prefix;
};

SplitUrl split_url(const std::string& base_url) {
  std::size_t scheme = base_url.find("://");
  if (scheme == std::string::npos) {
    raise(Errc::invalid_argument, "base url must include a scheme: " + base_url);
  }
  std::size_t path = base_url.find('/', scheme + 3);
  SplitUrl out;
  if (path == std::string::npos) {
    out.host_port = base_url;
  } else {
    out.host_port = base_url.substr(0, path);
    out.path_prefix = base_url.substr(path);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') {
      out.path_prefix.pop_back();
    }
  }
  return out;
}

}  // namespace

std::string HttpBackend::complete(Role /*role*/, const std::string& system_text,
                                  const std::string& prompt_text) {
  SplitUrl url = split_url(config_.base_url);

  json body;
  body["model"] = config_.model;
  body["messages"] = json::array({
      json{{"role", "system"}, {"content", system_text}},
      json{{"role", "user"}, {"content", prompt_text}},
  });
  std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(config_.backoff_ms * (1LL << (attempt - 1))));
    }
    httplib::Client client(url.host_port);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    auto res = client.Post(url.path_prefix + "/chat/completions", headers, payload,
                           "application/json");
    if (!res) {
      if (res.error() == httplib::Error::ConnectionTimeout ||
          res.error() == httplib::Error::Read) {
        last_error = "timeout contacting " + url.host_port;
      } else {
        last_error = "connection to " + url.host_port + " failed (" +
                     httplib::to_string(res.error()) + ")";
      }
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "status " + std::to_string(res->status) + ": " +
                   res->body.substr(0, 200);
      continue;
    }
    if (res->status != 200) {
      raise(Errc::http_error, "status " + std::to_string(res->status) + ": " +
                                  res->body.substr(0, 200));
    }
    try {
      json parsed = json::parse(res->body);
      return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      raise(Errc::http_error, std::string("malformed completion response: ") + e.what());
    }
  }
  if (last_error.find("timeout") != std::string::npos) {
    raise(Errc::timeout, last_error);
  }
  raise(Errc::http_error, last_error.empty() ? "request failed" : last_error);
}

BackendFactory make_backend_factory(const std::string& spec) {
  if (spec == "rule") {
    return [] { return std::make_unique<RuleBackend>(); };
  }
  if (spec.rfind("scripted:", 0) == 0) {
    std::string path = spec.substr(9);
    // parse eagerly so config errors surface before any task runs
    std::string text = read_file_or_fail(path);
    ScriptedBackend::from_json_text(text);
    return [text] {
      return std::make_unique<ScriptedBackend>(ScriptedBackend::from_json_text(text));
    };
  }
  if (spec == "http") {
    return [] { return std::make_unique<HttpBackend>(HttpBackendConfig::from_env()); };
  }
  raise(Errc::invalid_argument, "unknown llm backend spec '" + spec + "'");
}

}  // namespace mmorf
