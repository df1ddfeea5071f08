#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <functional>
#include <random>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "mmorf/bench.hpp"
#include "mmorf/planner.hpp"
#include "test_util.hpp"

using namespace mmorf;
using nlohmann::json;

namespace {

void check_error(Errc expected, const std::function<void()>& fn) {
  try {
    fn();
    FAIL_CHECK("expected error ", errc_name(expected));
  } catch (const Error& e) {
    CHECK(e.code() == expected);
  }
}

Route fixture_route() { return {parse_reaction("ac-acid.me-oh>>ac-ester")}; }

RouteReport report_of(double carc, int pyro, int ghs, double smp, int rl) {
  RouteReport r;
  r.carc = carc;
  r.pyro = pyro;
  r.ghs_count = ghs;
  r.smp = smp;
  r.rl = rl;
  return r;
}

}  // namespace

TEST_CASE("validate_route verdicts carry reason codes") {
  World world = tiny_world();

  CHECK(validate_route(fixture_route(), world).valid);

  ValidityVerdict empty = validate_route({}, world);
  CHECK_FALSE(empty.valid);
  CHECK(empty.reasons == std::vector<std::string>{"EmptyRoute"});

  // ph-ester route through the template: both leaves purchasable
  Route ph = {parse_reaction("me-oh.ph-acid>>ph-ester")};
  CHECK(validate_route(ph, world).valid);

  // unpurchasable leaf
  Route bad_leaf = {parse_reaction("zz-qq>>ac-ester")};
  ValidityVerdict v1 = validate_route(bad_leaf, world);
  CHECK_FALSE(v1.valid);
  bool leaf_reason = false;
  for (const std::string& r : v1.reasons) {
    if (r.find("UnpurchasableLeaf:zz-qq") != std::string::npos) leaf_reason = true;
  }
  CHECK(leaf_reason);

  // two reactions producing the same intermediate
  World w2 = world_from_json_text(R"({
    "building_blocks": {"a": 1.0, "b": 1.0, "c": 1.0},
    "reactions": [
      {"product": "top", "reactants": ["mid", "mid2"], "plausibility": 0.9},
      {"product": "mid", "reactants": ["a"], "plausibility": 0.9},
      {"product": "mid", "reactants": ["b"], "plausibility": 0.8},
      {"product": "mid2", "reactants": ["c"], "plausibility": 0.9}
    ]})");
  Route dup = {parse_reaction("mid.mid2>>top"), parse_reaction("a>>mid"),
               parse_reaction("b>>mid"), parse_reaction("c>>mid2")};
  ValidityVerdict v2 = validate_route(dup, w2);
  CHECK_FALSE(v2.valid);
  bool dup_reason = false;
  for (const std::string& r : v2.reasons) {
    if (r.find("DuplicateProducer:mid") != std::string::npos) dup_reason = true;
  }
  CHECK(dup_reason);

  // a produced intermediate that nothing consumes
  Route orphan = {parse_reaction("ac-acid.me-oh>>ac-ester"),
                  parse_reaction("me-oh.ph-acid>>ph-ester")};
  CHECK_FALSE(validate_route(orphan, world).valid);
}

TEST_CASE("feasibility_check accepts only top-5 predictions") {
  World world = load_world(data_path("feas7.world.json"));
  auto expansions = expand_retro(world, "p-x", 10);
  REQUIRE(expansions.size() == 7);

  // rank 1 and rank 5 pass, rank 6 (the template instantiation) fails
  CHECK(feasibility_check(parse_reaction("r-1>>p-x"), world));
  CHECK(feasibility_check(parse_reaction("r-5>>p-x"), world));
  CHECK(expansions[5].canonical == "p-y>>p-x");
  CHECK_FALSE(feasibility_check(parse_reaction("p-y>>p-x"), world));
  CHECK_FALSE(feasibility_check(parse_reaction("r-7>>p-x"), world));
  CHECK_FALSE(feasibility_check(parse_reaction("x>>y"), world));

  // an infeasible reaction invalidates the whole route
  ValidityVerdict verdict = validate_route({parse_reaction("p-y>>p-x")}, world);
  CHECK_FALSE(verdict.valid);
  bool infeasible = false;
  for (const std::string& r : verdict.reasons) {
    if (r.find("InfeasibleReaction") != std::string::npos) infeasible = true;
  }
  CHECK(infeasible);
}

TEST_CASE("build_report on the fixture route") {
  World world = tiny_world();
  RouteReport report = build_report(fixture_route(), world);
  CHECK(report.carc == doctest::Approx(0.3));
  CHECK(report.pyro == 0);
  CHECK(report.ghs_count == 1);
  CHECK(report.ghs_codes == std::set<std::string>{"H225"});
  CHECK(report.smp == doctest::Approx(15.0));
  CHECK(report.rl == 1);
  CHECK(report.starting_materials == std::vector<std::string>{"ac-acid", "me-oh"});
  CHECK(report.molecules.size() == 3);
  CHECK(report.reactions == std::vector<std::string>{"ac-acid.me-oh>>ac-ester"});

  check_error(Errc::invalid_route, [&] { build_report({}, world); });
}

TEST_CASE("smp counts each unique starting material once by default") {
  // me-oh is a leaf of both reactions; by default it is charged once
  World world = world_from_json_text(R"({
    "building_blocks": {"me-oh": 5.0, "ac-acid": 10.0, "ph-acid": 7.5},
    "reactions": [
      {"product": "top-x", "reactants": ["ac-ester", "ph-ester"], "plausibility": 0.9},
      {"product": "ac-ester", "reactants": ["ac-acid", "me-oh"], "plausibility": 0.9},
      {"product": "ph-ester", "reactants": ["ph-acid", "me-oh"], "plausibility": 0.9}
    ]})");
  Route route = {parse_reaction("ac-ester.ph-ester>>top-x"),
                 parse_reaction("ac-acid.me-oh>>ac-ester"),
                 parse_reaction("me-oh.ph-acid>>ph-ester")};
  RouteReport once = build_report(route, world);
  CHECK(once.smp == doctest::Approx(10.0 + 7.5 + 5.0));
  RouteReport twice = build_report(route, world, /*smp_per_occurrence=*/true);
  CHECK(twice.smp == doctest::Approx(10.0 + 7.5 + 5.0 + 5.0));
  CHECK(once.rl == 3);
}

TEST_CASE("check_constraints uses ground-truth flags") {
  World world = tiny_world();
  Route ph_route = {parse_reaction("me-oh.ph-cl>>ph-ester")};

  std::vector<Constraint> carc = {{Constraint::Type::carcinogen, {}}};
  ConstraintResult r1 = check_constraints(ph_route, carc, world);
  CHECK_FALSE(r1.satisfied);
  REQUIRE(r1.violations.size() == 1);
  CHECK(r1.violations[0].molecules == std::vector<std::string>{"ph-cl"});

  std::vector<Constraint> user_absent = {{Constraint::Type::user, {"zz-qq"}}};
  CHECK(check_constraints(ph_route, user_absent, world).satisfied);

  // conjunction: satisfied iff every constraint is
  std::vector<Constraint> all = {{Constraint::Type::carcinogen, {}},
                                 {Constraint::Type::pyrophoric, {}},
                                 {Constraint::Type::user, {"zz-qq"}}};
  CHECK_FALSE(check_constraints(ph_route, all, world).satisfied);
  Route clean = fixture_route();
  CHECK(check_constraints(clean, all, world).satisfied);
}

TEST_CASE("dominance is a strict partial order on the five objectives") {
  RouteReport a = report_of(0.3, 0, 1, 15, 1);
  RouteReport equal = report_of(0.3, 0, 1, 15, 1);
  CHECK_FALSE(dominates(a, equal));
  CHECK_FALSE(dominates(equal, a));
  CHECK(dominates_or_equal(a, equal));

  RouteReport worse_ghs = report_of(0.3, 0, 2, 15, 1);
  CHECK(dominates(a, worse_ghs));
  CHECK_FALSE(dominates(worse_ghs, a));

  RouteReport incomparable = report_of(0.2, 0, 3, 15, 1);
  CHECK_FALSE(dominates(incomparable, worse_ghs));
  CHECK_FALSE(dominates(worse_ghs, incomparable));

  // irreflexive + antisymmetric on random reports
  std::mt19937_64 rng(5);
  auto random_report = [&]() {
    return report_of((rng() % 10) / 10.0, int(rng() % 2), int(rng() % 5),
                     double(rng() % 40), 1 + int(rng() % 6));
  };
  for (int i = 0; i < 300; ++i) {
    RouteReport x = random_report(), y = random_report();
    CHECK_FALSE(dominates(x, x));
    CHECK_FALSE((dominates(x, y) && dominates(y, x)));
  }
}

TEST_CASE("pareto_front equals the pairwise brute-force oracle") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 50;
    std::vector<RouteReport> reports;
    for (std::size_t i = 0; i < n; ++i) {
      reports.push_back(report_of((rng() % 8) / 8.0, int(rng() % 2), int(rng() % 4),
                                  double(rng() % 25), 1 + int(rng() % 5)));
    }
    // independent O(n^2) oracle
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < n; ++i) {
      bool dominated = false;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const RouteReport& a = reports[j];
        const RouteReport& b = reports[i];
        bool le = a.carc <= b.carc && a.pyro <= b.pyro &&
                  a.ghs_count <= b.ghs_count && a.smp <= b.smp && a.rl <= b.rl;
        bool lt = a.carc < b.carc || a.pyro < b.pyro || a.ghs_count < b.ghs_count ||
                  a.smp < b.smp || a.rl < b.rl;
        if (le && lt) dominated = true;
      }
      if (!dominated) expected.push_back(i);
    }
    CHECK(pareto_front(reports) == expected);
  }

  // duplicates are all kept
  std::vector<RouteReport> dup = {report_of(0.1, 0, 1, 1, 1),
                                  report_of(0.1, 0, 1, 1, 1)};
  CHECK(pareto_front(dup) == std::vector<std::size_t>{0, 1});
  CHECK(pareto_front({report_of(0.5, 1, 2, 3, 4)}) == std::vector<std::size_t>{0});

  // a dominance chain collapses to its head
  std::vector<RouteReport> chain = {report_of(0.1, 0, 1, 1, 1),
                                    report_of(0.2, 0, 2, 2, 2),
                                    report_of(0.3, 1, 3, 3, 3)};
  CHECK(pareto_front(chain) == std::vector<std::size_t>{0});
}

TEST_CASE("summary arithmetic comes from raw counts") {
  BenchmarkSummary paper_row = summary_from_counts(111, 71, 71, 54);
  CHECK(paper_row.p_minus_s == doctest::Approx(1700.0 / 111.0));
  // to one decimal: 15.3
  CHECK(std::round(paper_row.p_minus_s * 10) / 10 == doctest::Approx(15.3));
  CHECK(paper_row.pr == doctest::Approx(100.0 * 71 / 111));
  CHECK(paper_row.sr == doctest::Approx(100.0 * 54 / 111));
  CHECK(paper_row.sr <= paper_row.vr);
  CHECK(paper_row.vr <= paper_row.pr);

  BenchmarkSummary trivial = summary_from_counts(1, 1, 1, 1);
  CHECK(trivial.pr == 100.0);
  CHECK(trivial.vr == 100.0);
  CHECK(trivial.sr == 100.0);
  CHECK(trivial.p_minus_s == 0.0);

  BenchmarkSummary none = summary_from_counts(0, 0, 0, 0);
  CHECK(none.pr == 0.0);
}

TEST_CASE("compute_summary tallies a mixed fixture run") {
  World world = mid_world();
  std::vector<std::pair<PlanResult, std::vector<Constraint>>> results;

  Task task = [&] {
    Task t;
    t.id = "x";
    t.product = "tgt-1";
    return t;
  }();
  SearchConfig config;

  // 1: solved, satisfies C (the greedy route avoids haz-m)
  PlanResult solved = run(task, world, config);
  REQUIRE(solved.route);
  results.push_back({solved, {{Constraint::Type::carcinogen, {}}}});

  // 2: solved but violates a user constraint on one of its molecules
  std::vector<std::string> used;
  for (const Reaction& r : *solved.route) {
    for (const std::string& m : reaction_molecules(r)) used.push_back(m);
  }
  results.push_back({solved, {{Constraint::Type::user, {used.front()}}}});

  // 3: failed (empty route)
  PlanResult failed;
  failed.task_id = "gone";
  failed.status = PlanStatus::failed_budget;
  results.push_back({failed, {}});

  // 4: present but invalid route (unpurchasable leaf)
  PlanResult invalid;
  invalid.task_id = "inv";
  invalid.status = PlanStatus::solved;
  invalid.route = Route{parse_reaction("zz-qq>>tgt-1")};
  results.push_back({invalid, {}});

  BenchmarkSummary s = compute_summary(results, world);
  CHECK(s.n_tasks == 4);
  CHECK(s.present_count == 3);
  CHECK(s.valid_count == 2);
  CHECK(s.success_count == 1);
  CHECK(s.pr == doctest::Approx(75.0));
  CHECK(s.vr == doctest::Approx(50.0));
  CHECK(s.sr == doctest::Approx(25.0));
  CHECK(s.p_minus_s == doctest::Approx(50.0));
  CHECK(s.avg_rl == doctest::Approx(solved.report->rl));
  CHECK(s.avg_smp == doctest::Approx(solved.report->smp));
}

TEST_CASE("staticreg restrictions union matching entries") {
  auto db = load_restriction_db(data_path("restrictions_db.json"));
  REQUIRE(db.size() == 3);

  RestrictionSet ester = staticreg_restrictions(db, "ac-ester");
  CHECK(ester.molecules == std::set<std::string>{"ph-cl"});
  CHECK(ester.reaction_patterns == std::set<std::string>{"$X-cl"});
  // depth limits {3, -1}: the most permissive (-1) wins
  CHECK(ester.depth_limit == -1);

  RestrictionSet nothing = staticreg_restrictions(db, "zz-qq");
  CHECK(nothing.empty());
  CHECK(nothing.depth_limit == -1);

  // max of finite limits when no -1 entry matches
  std::vector<RestrictionDbEntry> finite = {db[0]};
  finite[0].depth_limit = 3;
  RestrictionDbEntry second = db[0];
  second.depth_limit = 5;
  finite.push_back(second);
  CHECK(staticreg_restrictions(finite, "ac-ester").depth_limit == 5);

  check_error(Errc::malformed_entry, [] {
    restriction_db_from_json_text(R"([{"type": "nope", "apply_when": ["x"]}])");
  });
  check_error(Errc::malformed_entry, [] {
    restriction_db_from_json_text(R"([{"type": "restriction", "apply_when": []}])");
  });
}

TEST_CASE("staticreg planner run honors the database restrictions") {
  World world = tiny_world();
  auto db = load_restriction_db(data_path("restrictions_db.json"));
  RestrictionSet preset = staticreg_restrictions(db, "ph-ester");
  Task task;
  task.id = "sr";
  task.product = "ph-ester";
  SearchConfig config;
  config.system = SystemKind::staticreg;
  PlanResult result = run(task, world, config, nullptr, &preset);
  REQUIRE(result.status == PlanStatus::solved);
  for (const Reaction& r : *result.route) {
    for (const std::string& m : reaction_molecules(r)) CHECK(m != "ph-cl");
  }
}

TEST_CASE("pareto10 collects routes and averages the front") {
  World world = mid_world();
  Task task;
  task.id = "p10";
  task.product = "tgt-1";
  SearchConfig config;

  Pareto10Result result = pareto10(task, world, config);
  // the fixture world has 7 distinct routes within the default budget
  CHECK(result.routes.size() == 7);
  CHECK(result.reports.size() == result.routes.size());
  REQUIRE_FALSE(result.front.empty());
  REQUIRE(result.averages);

  // front must match the brute-force pairwise oracle
  std::vector<std::size_t> expected = pareto_front(result.reports);
  CHECK(result.front == expected);

  // averages recomputed by hand
  double carc = 0;
  for (std::size_t i : result.front) carc += result.reports[i].carc;
  CHECK(result.averages->carc == doctest::Approx(carc / result.front.size()));

  // unsolvable target: empty result
  World rfas = load_world(data_path("rfas.world.json"));
  RestrictionSet block;
  block.molecules.insert("x-hzd");
  Task task2;
  task2.id = "none";
  task2.product = "prod2";
  Pareto10Result empty = pareto10(task2, rfas, [&] {
    SearchConfig c;
    c.i_max = 50;
    return c;
  }());
  // prod2 has exactly one route; block nothing -> 1 route; the empty case:
  CHECK(empty.routes.size() == 1);

  // identical reports: the front keeps all of them
  std::vector<RouteReport> same(4, result.reports[0]);
  CHECK(pareto_front(same).size() == 4);
}

TEST_CASE("brute force enumerates exactly the valid routes") {
  World tiny = tiny_world();
  std::vector<Route> ester = brute_force_routes(tiny, "ac-ester", 2);
  REQUIRE(ester.size() == 1);
  CHECK(route_key(ester[0]) == "ac-acid.me-oh>>ac-ester\n");

  CHECK(brute_force_routes(tiny, "zz-qq", 3).empty());
  check_error(Errc::invalid_argument, [&] { brute_force_routes(tiny, "ac-ester", 0); });

  World world = mid_world();
  std::vector<Route> all = brute_force_routes(world, "tgt-1", 4);
  CHECK(all.size() == 7);
  // deterministic order: lengths ascending
  for (std::size_t i = 1; i < all.size(); ++i) {
    CHECK(all[i - 1].size() <= all[i].size());
  }
  // depth bound excludes the deep chain at max_depth 3
  CHECK(brute_force_routes(world, "tgt-1", 3).size() == 6);

  // every enumerated route is valid
  for (const Route& r : all) CHECK(validate_route(r, world).valid);

  check_error(Errc::budget_exceeded,
              [&] { brute_force_routes(world, "tgt-1", 4, 5); });
}

TEST_CASE("ghs lookups hit the cache before the network") {
  GhsClientConfig config;
  config.cache_path = data_path("ghs_cache.json");
  config.http_enabled = false;

  std::set<std::string> codes = fetch_ghs_remote("aspirin", config);
  CHECK(codes == std::set<std::string>{"H302", "H315"});

  check_error(Errc::not_found, [&] { fetch_ghs_remote("unobtainium", config); });
}

TEST_CASE("ghs cassette: one live fetch, then offline replay") {
  // canned response captured once; replayed from a local server
  const std::string cassette_body = R"({
    "record": {"identifier": "ethanol",
               "hazards": [{"code": "H225", "text": "Highly flammable"},
                            {"code": "H319", "text": "Causes eye irritation"}]}
  })";

  httplib::Server server;
  int hits = 0;
  server.Get("/ghs/ethanol", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content(cassette_body, "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  std::string scratch = std::string(MMORF_SCRATCH_DIR) + "/ghs_cache_test.json";
  std::remove(scratch.c_str());

  GhsClientConfig config;
  config.http_enabled = true;
  config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/ghs";
  config.cache_path = scratch;

  std::set<std::string> live = fetch_ghs_remote("ethanol", config);
  CHECK(live == std::set<std::string>{"H225", "H319"});
  CHECK_FALSE(live.empty());
  CHECK(hits == 1);

  server.stop();
  thread.join();

  // second lookup never touches the network
  std::set<std::string> cached = fetch_ghs_remote("ethanol", config);
  CHECK(cached == live);
  CHECK(hits == 1);

  GhsClientConfig offline = config;
  offline.http_enabled = false;
  CHECK(fetch_ghs_remote("ethanol", offline) == live);

  check_error(Errc::not_found, [&] {
    GhsClientConfig disabled = config;
    disabled.http_enabled = false;
    fetch_ghs_remote("methanol", disabled);
  });
}

TEST_CASE("load_benchmark validates the task schema") {
  std::vector<Task> scmo = load_benchmark(data_path("scmo_tasks.json"));
  CHECK(scmo.size() == 107);
  for (const Task& t : scmo) {
    CHECK(t.mode == "scmo");
    CHECK(t.constraints.empty());
    CHECK_FALSE(t.product.empty());
  }
  CHECK(scmo[0].id == "scmo-001");

  std::vector<Task> mid = load_benchmark(data_path("mid_manifest.json"));
  REQUIRE(mid.size() == 4);
  REQUIRE(mid[3].constraints.size() == 2);
  CHECK(mid[3].constraints[0].type == Constraint::Type::carcinogen);
  CHECK(mid[3].constraints[1].type == Constraint::Type::user);
  CHECK(mid[3].constraints[1].molecules == std::vector<std::string>{"bb-7"});

  std::string bad = std::string(MMORF_SCRATCH_DIR) + "/bad_manifest.json";
  {
    std::ofstream out(bad);
    out << R"([{"id": "b", "product": "x", "constraints": [{"type": "X"}]}])";
  }
  check_error(Errc::schema_violation, [&] { load_benchmark(bad); });
}

TEST_CASE("results round-trip through JSONL") {
  World world = tiny_world();
  Task task;
  task.id = "jsonl";
  task.product = "ac-ester";
  PlanResult result = run(task, world, SearchConfig{});

  std::string path = std::string(MMORF_SCRATCH_DIR) + "/results_test.jsonl";
  std::remove(path.c_str());
  append_results_jsonl(path, {result, result});
  std::vector<PlanResult> loaded = load_results_jsonl(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].task_id == "jsonl");
  CHECK(loaded[0].status == PlanStatus::solved);
  CHECK(route_key(*loaded[0].route) == route_key(*result.route));
  std::remove(path.c_str());
}
