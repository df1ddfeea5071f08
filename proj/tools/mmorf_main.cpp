#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmorf/bench.hpp"
#include "mmorf/planner.hpp"

namespace {

using namespace mmorf;
using nlohmann::json;

struct CommonOptions {
  std::string world_path;
  std::string system = "plain";
  std::string llm_spec;
  std::string restrictions_db;
  std::string config_path;
  int i_max = -1;
  int i_init = -1;
  int k = -1;
  int branching = -1;
  int time_limit = -1;
  std::string selection;
  std::string return_policy;
  bool smp_per_occurrence = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_world = true) {
  if (with_world) {
    cmd->add_option("--world", opts.world_path, "world JSON file")->required();
  }
  cmd->add_option("--system", opts.system, "plain|masil|rfas|staticreg");
  cmd->add_option("--llm", opts.llm_spec, "rule | scripted:<path> | http");
  cmd->add_option("--restrictions-db", opts.restrictions_db,
                  "restriction database (staticreg)");
  cmd->add_option("--config", opts.config_path, "config JSON file");
  cmd->add_option("--i-max", opts.i_max, "iteration limit");
  cmd->add_option("--i-init", opts.i_init, "delegation-free initial iterations (masil)");
  cmd->add_option("--k", opts.k, "candidates per simulation step");
  cmd->add_option("--b", opts.branching, "expansion branching limit");
  cmd->add_option("--time-limit", opts.time_limit, "time limit in seconds");
  cmd->add_option("--selection", opts.selection, "value|agentic");
  cmd->add_option("--return", opts.return_policy, "first_found|verified");
  cmd->add_flag("--smp-per-occurrence", opts.smp_per_occurrence,
                "count starting-material prices per occurrence");
}

// Precedence: CLI flag > environment > config file > built-in default.
SearchConfig resolve_config(const CommonOptions& opts, std::string* llm_spec) {
  SearchConfig config;
  json file = json::object();
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) raise(Errc::parse_error, "cannot open config '" + opts.config_path + "'");
    in >> file;
  }
  auto pick_int = [&](const char* key, int flag_value, int fallback) {
    if (flag_value >= 0) return flag_value;
    std::string env_key = "MMORF_" + std::string(key);
    for (char& c : env_key) c = static_cast<char>(std::toupper(c));
    if (const char* v = std::getenv(env_key.c_str())) return std::atoi(v);
    if (file.contains(key)) return file.at(key).get<int>();
    return fallback;
  };
  config.i_max = pick_int("i_max", opts.i_max, config.i_max);
  config.i_init = pick_int("i_init", opts.i_init, config.i_init);
  config.k_candidates = pick_int("k_candidates", opts.k, config.k_candidates);
  config.branching = pick_int("branching", opts.branching, config.branching);
  config.time_limit_seconds =
      pick_int("time_limit_seconds", opts.time_limit, config.time_limit_seconds);
  config.agent.turn_limit = pick_int("turn_limit", -1, config.agent.turn_limit);

  config.system = system_from_string(opts.system);
  config.return_policy = (config.system == SystemKind::masil ||
                          config.system == SystemKind::rfas)
                             ? ReturnPolicy::verified
                             : ReturnPolicy::first_found;
  if (!opts.return_policy.empty()) {
    if (opts.return_policy == "first_found") {
      config.return_policy = ReturnPolicy::first_found;
    } else if (opts.return_policy == "verified") {
      config.return_policy = ReturnPolicy::verified;
    } else {
      raise(Errc::invalid_argument, "--return must be first_found|verified");
    }
  }
  if (!opts.selection.empty()) {
    if (opts.selection == "value") {
      config.selection_policy = SelectionPolicy::value;
    } else if (opts.selection == "agentic") {
      config.selection_policy = SelectionPolicy::agentic;
    } else {
      raise(Errc::invalid_argument, "--selection must be value|agentic");
    }
  }
  config.smp_per_occurrence = opts.smp_per_occurrence;

  std::string spec = opts.llm_spec;
  if (spec.empty()) {
    if (const char* v = std::getenv("MMORF_LLM_BACKEND")) spec = v;
  }
  if (spec.empty() && file.contains("llm")) spec = file.at("llm").get<std::string>();
  if (spec.empty()) spec = "rule";
  *llm_spec = spec;
  return config;
}

std::optional<RestrictionSet> resolve_preset(const CommonOptions& opts,
                                             const std::string& product) {
  if (opts.restrictions_db.empty()) return std::nullopt;
  auto db = load_restriction_db(opts.restrictions_db);
  return staticreg_restrictions(db, product);
}

void print_route_report(std::ostream& out, const PlanResult& result) {
  out << "task: " << result.task_id << "\n";
  out << "status: " << plan_status_name(result.status) << "\n";
  out << "iterations: " << result.iterations_used << "\n";
  if (result.route) {
    out << "route (" << result.route->size() << " reactions):\n";
    for (const Reaction& r : *result.route) {
      out << "  " << canonicalize_reaction(r) << "\n";
    }
  }
  if (result.report) {
    const RouteReport& r = *result.report;
    out << "report: carc=" << r.carc << " pyro=" << r.pyro << " ghs=" << r.ghs_count
        << " smp=" << r.smp << " rl=" << r.rl << "\n";
    out << "starting materials:";
    for (const std::string& m : r.starting_materials) out << " " << m;
    out << "\n";
  }
  if (!result.rejected_routes.empty()) {
    out << "rejected routes: " << result.rejected_routes.size() << "\n";
  }
}

PlanResult run_one(const Task& task, const World& world, const SearchConfig& config,
                   const std::string& llm_spec,
                   const std::optional<RestrictionSet>& preset) {
  bool needs_backend = config.system == SystemKind::masil ||
                       config.system == SystemKind::rfas ||
                       config.return_policy == ReturnPolicy::verified;
  std::unique_ptr<LlmBackend> backend;
  if (needs_backend) backend = make_backend_factory(llm_spec)();
  return run(task, world, config, backend.get(), preset ? &*preset : nullptr);
}

int cmd_plan(const CommonOptions& opts, const std::string& task_path,
             const std::string& out_path) {
  std::string llm_spec;
  SearchConfig config = resolve_config(opts, &llm_spec);
  World world = load_world(opts.world_path);
  Task task = load_task(task_path);
  auto preset = resolve_preset(opts, task.product);

  PlanResult result = run_one(task, world, config, llm_spec, preset);
  if (!out_path.empty()) append_results_jsonl(out_path, {result});
  print_route_report(std::cout, result);
  return result.route ? 0 : 1;
}

int cmd_bench(const CommonOptions& opts, const std::string& manifest_path,
              const std::string& out_path, const std::string& summary_path, int jobs) {
  std::string llm_spec;
  SearchConfig config = resolve_config(opts, &llm_spec);
  World world = load_world(opts.world_path);
  std::vector<Task> tasks = load_benchmark(manifest_path);

  std::vector<PlanResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        auto preset = resolve_preset(opts, tasks[i].product);
        results[i] = run_one(tasks[i], world, config, llm_spec, preset);
      } catch (const Error& e) {
        PlanResult failed;
        failed.task_id = tasks[i].id;
        failed.status = PlanStatus::failed_exhausted;
        failed.event_log.push_back(EventRecord{0, "init_error", e.what()});
        results[i] = std::move(failed);
      }
    }
  };
  int n_threads = std::max(1, jobs);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  if (!out_path.empty()) append_results_jsonl(out_path, results);

  std::vector<std::pair<PlanResult, std::vector<Constraint>>> pairs;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    pairs.emplace_back(results[i], tasks[i].constraints);
  }
  BenchmarkSummary summary = compute_summary(pairs, world);
  std::string summary_text = summary.to_json().dump(2) + "\n";
  if (!summary_path.empty()) {
    std::ofstream out(summary_path);
    out << summary_text;
  }
  std::cout << summary_text;
  return 0;
}

int cmd_eval(const CommonOptions& opts, const std::string& results_path,
             const std::string& manifest_path, const std::string& summary_path) {
  World world = load_world(opts.world_path);
  std::vector<Task> tasks = load_benchmark(manifest_path);
  std::vector<PlanResult> results = load_results_jsonl(results_path);

  std::map<std::string, const Task*> by_id;
  for (const Task& t : tasks) by_id[t.id] = &t;
  std::vector<std::pair<PlanResult, std::vector<Constraint>>> pairs;
  for (PlanResult& r : results) {
    auto it = by_id.find(r.task_id);
    std::vector<Constraint> constraints =
        it == by_id.end() ? std::vector<Constraint>{} : it->second->constraints;
    pairs.emplace_back(std::move(r), std::move(constraints));
  }
  BenchmarkSummary summary = compute_summary(pairs, world);
  std::string summary_text = summary.to_json().dump(2) + "\n";
  if (!summary_path.empty()) {
    std::ofstream out(summary_path);
    out << summary_text;
  }
  std::cout << summary_text;
  return 0;
}

int cmd_oracle(const CommonOptions& opts, const std::string& product, int max_depth,
               std::size_t node_cap) {
  World world = load_world(opts.world_path);
  std::vector<Route> routes = brute_force_routes(world, product, max_depth, node_cap);
  json out;
  out["product"] = product;
  out["max_depth"] = max_depth;
  json list = json::array();
  for (const Route& r : routes) {
    json entry;
    json reactions = json::array();
    for (const Reaction& rx : r) reactions.push_back(canonicalize_reaction(rx));
    entry["reactions"] = reactions;
    entry["report"] = route_metrics(r, world).to_json();
    list.push_back(entry);
  }
  out["routes"] = list;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_vf_eval(const CommonOptions& opts, const std::string& expr,
                const std::string& route_path) {
  World world = load_world(opts.world_path);
  ValueFunctionAst ast = parse_vf(expr);

  RouteState state;
  if (!route_path.empty()) {
    std::ifstream in(route_path);
    if (!in) raise(Errc::parse_error, "cannot open route '" + route_path + "'");
    json j;
    in >> j;
    if (j.contains("reactions")) {
      for (const json& s : j.at("reactions")) {
        state.reactions.push_back(s.get<std::string>());
      }
    }
    if (j.contains("frontier")) {
      for (const json& s : j.at("frontier")) {
        state.frontier.push_back(s.get<std::string>());
      }
    }
  }

  json out;
  out["expression"] = render_vf(ast);
  try {
    out["value"] = evaluate_vf(ast, state, world);
  } catch (const Error& e) {
    if (e.code() != Errc::division_by_zero) throw;
    out["value"] = nullptr;
    out["error"] = e.what();
  }
  json components = json::object();
  for (const auto& [name, value] : evaluate_vf_components(ast, state, world)) {
    components[name] = value;
  }
  out["components"] = components;
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-agent multi-objective retrosynthesis planning engine"};
  app.require_subcommand(1);

  CommonOptions opts;

  auto* plan = app.add_subcommand("plan", "plan one task");
  std::string task_path, out_path;
  plan->add_option("--task", task_path, "task JSON file")->required();
  add_common(plan, opts);
  plan->add_option("--out", out_path, "append the result to this JSONL file");

  auto* bench = app.add_subcommand("bench", "run a task manifest");
  std::string manifest_path, summary_path;
  int jobs = 1;
  bench->add_option("--manifest", manifest_path, "task manifest JSON")->required();
  add_common(bench, opts);
  bench->add_option("--out", out_path, "results JSONL path");
  bench->add_option("--summary", summary_path, "summary JSON path");
  bench->add_option("--jobs", jobs, "concurrent tasks");

  auto* eval = app.add_subcommand("eval", "recompute a summary from results");
  std::string results_path;
  eval->add_option("--results", results_path, "results JSONL")->required();
  eval->add_option("--manifest", manifest_path, "task manifest JSON")->required();
  add_common(eval, opts);
  eval->add_option("--summary", summary_path, "summary JSON path");

  auto* oracle = app.add_subcommand("oracle", "enumerate all valid routes");
  std::string product;
  int max_depth = 4;
  std::size_t node_cap = 1000000;
  oracle->add_option("--product", product, "target molecule")->required();
  oracle->add_option("--max-depth", max_depth, "depth bound");
  oracle->add_option("--node-cap", node_cap, "enumeration node cap");
  add_common(oracle, opts);

  auto* vf = app.add_subcommand("vf", "value-function utilities");
  auto* vf_eval = vf->add_subcommand("eval", "evaluate an expression on a route");
  std::string expr, route_path;
  vf_eval->add_option("expr", expr, "value function text")->required();
  vf_eval->add_option("--route", route_path, "route JSON ({reactions, frontier})");
  add_common(vf_eval, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (plan->parsed()) return cmd_plan(opts, task_path, out_path);
    if (bench->parsed()) {
      return cmd_bench(opts, manifest_path, out_path, summary_path, jobs);
    }
    if (eval->parsed()) return cmd_eval(opts, results_path, manifest_path, summary_path);
    if (oracle->parsed()) return cmd_oracle(opts, product, max_depth, node_cap);
    if (vf->parsed() && vf_eval->parsed()) return cmd_vf_eval(opts, expr, route_path);
    std::cerr << "no subcommand given\n";
    return 2;
  } catch (const mmorf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
