#include "mmorf/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>

#include "httplib.h"

namespace mmorf {

using nlohmann::json;

json BenchmarkSummary::to_json() const {
  json j;
  j["n_tasks"] = n_tasks;
  j["present_count"] = present_count;
  j["valid_count"] = valid_count;
  j["success_count"] = success_count;
  j["pr"] = pr;
  j["vr"] = vr;
  j["sr"] = sr;
  j["p_minus_s"] = p_minus_s;
  j["avg_carc"] = avg_carc;
  j["avg_pyro"] = avg_pyro;
  j["avg_ghs"] = avg_ghs;
  j["avg_smp"] = avg_smp;
  j["avg_rl"] = avg_rl;
  return j;
}

BenchmarkSummary summary_from_counts(int n_tasks, int present, int valid,
                                     int success) {
  BenchmarkSummary s;
  s.n_tasks = n_tasks;
  s.present_count = present;
  s.valid_count = valid;
  s.success_count = success;
  if (n_tasks > 0) {
    s.pr = 100.0 * present / n_tasks;
    s.vr = 100.0 * valid / n_tasks;
    s.sr = 100.0 * success / n_tasks;
    s.p_minus_s = 100.0 * (present - success) / n_tasks;
  }
  return s;
}

BenchmarkSummary compute_summary(
    const std::vector<std::pair<PlanResult, std::vector<Constraint>>>& results,
    const World& world) {
  int present = 0, valid = 0, success = 0;
  double carc = 0, pyro = 0, ghs = 0, smp = 0, rl = 0;
  for (const auto& [result, constraints] : results) {
    if (!result.route) continue;
    ++present;
    if (!validate_route(*result.route, world).valid) continue;
    ++valid;
    RouteReport report = result.report ? *result.report
                                       : route_metrics(*result.route, world);
    carc += report.carc;
    pyro += report.pyro;
    ghs += report.ghs_count;
    smp += report.smp;
    rl += report.rl;
    if (check_constraints(*result.route, constraints, world).satisfied) ++success;
  }
  BenchmarkSummary s = summary_from_counts(static_cast<int>(results.size()), present,
                                           valid, success);
  if (valid > 0) {
    s.avg_carc = carc / valid;
    s.avg_pyro = pyro / valid;
    s.avg_ghs = ghs / valid;
    s.avg_smp = smp / valid;
    s.avg_rl = rl / valid;
  }
  return s;
}

// ---------------------------------------------------------------------------
// StaticReg restriction database
// ---------------------------------------------------------------------------

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::parse_error, "cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::vector<RestrictionDbEntry> restriction_db_from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    raise(Errc::parse_error, e.what());
  }
  if (!root.is_array()) raise(Errc::malformed_entry, "restriction DB must be an array");
  std::vector<RestrictionDbEntry> db;
  int idx = 0;
  for (const json& e : root) {
    auto where = "entry " + std::to_string(idx);
    if (!e.is_object() || e.value("type", "") != "restriction") {
      raise(Errc::malformed_entry, where + ": type must be \"restriction\"");
    }
    RestrictionDbEntry entry;
    auto read_list = [&](const char* key, std::vector<std::string>& out) {
      if (!e.contains(key)) return;
      if (!e.at(key).is_array()) raise(Errc::malformed_entry, where + ": bad " + key);
      for (const json& s : e.at(key)) out.push_back(s.get<std::string>());
    };
    read_list("molecules", entry.molecules);
    read_list("specific_reactions", entry.specific_reactions);
    read_list("reaction_templates", entry.reaction_templates);
    read_list("apply_when", entry.apply_when);
    if (e.contains("depth_limit")) {
      if (!e.at("depth_limit").is_number_integer()) {
        raise(Errc::malformed_entry, where + ": depth_limit must be an integer");
      }
      entry.depth_limit = e.at("depth_limit").get<int>();
    }
    entry.rationale = e.value("rationale", "");
    if (entry.apply_when.empty()) {
      raise(Errc::malformed_entry, where + ": apply_when must be non-empty");
    }
    db.push_back(std::move(entry));
    ++idx;
  }
  return db;
}

std::vector<RestrictionDbEntry> load_restriction_db(const std::string& path) {
  return restriction_db_from_json_text(read_file(path));
}

RestrictionSet staticreg_restrictions(const std::vector<RestrictionDbEntry>& db,
                                      const std::string& product) {
  RestrictionSet out;
  bool any_match = false;
  bool unlimited = false;
  int max_limit = -1;
  for (const RestrictionDbEntry& entry : db) {
    bool matches = false;
    for (const std::string& pattern : entry.apply_when) {
      if (pattern_matches_loose(pattern, product)) {
        matches = true;
        break;
      }
    }
    if (!matches) continue;
    any_match = true;
    for (const std::string& m : entry.molecules) out.molecules.insert(m);
    for (const std::string& r : entry.specific_reactions) out.specific_reactions.insert(r);
    for (const std::string& p : entry.reaction_templates) out.reaction_patterns.insert(p);
    if (entry.depth_limit < 0) {
      unlimited = true;
    } else {
      max_limit = std::max(max_limit, entry.depth_limit);
    }
  }
  out.depth_limit = (!any_match || unlimited) ? -1 : max_limit;
  return out;
}

// ---------------------------------------------------------------------------
// Pareto10
// ---------------------------------------------------------------------------

json Pareto10Result::to_json() const {
  json j;
  json route_list = json::array();
  for (const Route& r : routes) {
    json one = json::array();
    for (const Reaction& rx : r) one.push_back(canonicalize_reaction(rx));
    route_list.push_back(one);
  }
  j["routes"] = route_list;
  json report_list = json::array();
  for (const RouteReport& r : reports) report_list.push_back(r.to_json());
  j["reports"] = report_list;
  j["front"] = front;
  if (averages) {
    j["front_averages"] = json{{"carc", averages->carc},
                               {"pyro", averages->pyro},
                               {"ghs", averages->ghs},
                               {"smp", averages->smp},
                               {"rl", averages->rl}};
  } else {
    j["front_averages"] = json();
  }
  return j;
}

Pareto10Result pareto10(const Task& task, const World& world,
                        const SearchConfig& config) {
  if (config.system != SystemKind::plain) {
    raise(Errc::invalid_argument, "pareto10 runs the plain system");
  }
  Pareto10Result result;
  result.routes = collect_routes(task, world, config, 10);
  for (const Route& r : result.routes) {
    result.reports.push_back(route_metrics(r, world, config.smp_per_occurrence));
  }
  if (result.reports.empty()) return result;
  result.front = pareto_front(result.reports);
  ObjectiveAverages avg;
  for (std::size_t idx : result.front) {
    const RouteReport& r = result.reports[idx];
    avg.carc += r.carc;
    avg.pyro += r.pyro;
    avg.ghs += r.ghs_count;
    avg.smp += r.smp;
    avg.rl += r.rl;
  }
  double n = static_cast<double>(result.front.size());
  avg.carc /= n;
  avg.pyro /= n;
  avg.ghs /= n;
  avg.smp /= n;
  avg.rl /= n;
  result.averages = avg;
  return result;
}

// ---------------------------------------------------------------------------
// GHS retrieval with on-disk cache
// ---------------------------------------------------------------------------

namespace {

std::mutex ghs_cache_mutex;

json read_cache(const std::string& path) {
  std::ifstream in(path);
  if (!in) return json::object();
  try {
    json j;
    in >> j;
    return j.is_object() ? j : json::object();
  } catch (const json::exception&) {
    return json::object();
  }
}

}  // namespace

std::set<std::string> fetch_ghs_remote(const std::string& identifier,
                                       const GhsClientConfig& config) {
  {
    std::lock_guard<std::mutex> lock(ghs_cache_mutex);
    json cache = read_cache(config.cache_path);
    if (cache.contains(identifier)) {
      std::set<std::string> codes;
      for (const json& c : cache.at(identifier)) codes.insert(c.get<std::string>());
      return codes;
    }
  }

  if (!config.http_enabled || config.base_url.empty()) {
    raise(Errc::not_found, "'" + identifier + "' not cached and http is disabled");
  }

  std::size_t scheme = config.base_url.find("://");
  if (scheme == std::string::npos) {
    raise(Errc::invalid_argument, "ghs base url needs a scheme");
  }
  std::size_t slash = config.base_url.find('/', scheme + 3);
  std::string host = slash == std::string::npos ? config.base_url
                                                : config.base_url.substr(0, slash);
  std::string prefix = slash == std::string::npos ? "" : config.base_url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  httplib::Client client(host);
  client.set_connection_timeout(config.timeout_seconds, 0);
  client.set_read_timeout(config.timeout_seconds, 0);
  auto res = client.Get(prefix + "/" + identifier);
  if (!res) {
    raise(Errc::http_error, "ghs request failed (" + httplib::to_string(res.error()) + ")");
  }
  if (res->status == 404) raise(Errc::not_found, "'" + identifier + "'");
  if (res->status != 200) {
    raise(Errc::http_error,
          "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  if (res->body.empty()) raise(Errc::parse_error, "empty ghs response");

  static const std::regex code_re("H[0-9]{3}");
  std::set<std::string> codes;
  for (auto it = std::sregex_iterator(res->body.begin(), res->body.end(), code_re);
       it != std::sregex_iterator(); ++it) {
    codes.insert(it->str());
  }

  {
    std::lock_guard<std::mutex> lock(ghs_cache_mutex);
    json cache = read_cache(config.cache_path);
    cache[identifier] = std::vector<std::string>(codes.begin(), codes.end());
    if (!config.cache_path.empty()) {
      std::string tmp = config.cache_path + ".tmp";
      std::ofstream out(tmp);
      out << cache.dump(2) << "\n";
      out.close();
      std::rename(tmp.c_str(), config.cache_path.c_str());
    }
  }
  return codes;
}

// ---------------------------------------------------------------------------
// JSONL persistence
// ---------------------------------------------------------------------------

void append_results_jsonl(const std::string& path,
                          const std::vector<PlanResult>& results) {
  std::ofstream out(path, std::ios::app);
  if (!out) raise(Errc::parse_error, "cannot open '" + path + "' for writing");
  for (const PlanResult& r : results) {
    out << r.to_json().dump() << "\n";
  }
}

std::vector<PlanResult> load_results_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::parse_error, "cannot open '" + path + "'");
  std::vector<PlanResult> results;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      results.push_back(plan_result_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      raise(Errc::parse_error,
            path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return results;
}

}  // namespace mmorf
