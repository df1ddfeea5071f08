#include "mmorf/report.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace mmorf {

using nlohmann::json;

namespace {

json profile_json(const MoleculeProfile& p) {
  json j;
  j["carc_score"] = p.carc_score;
  j["carc_alert"] = p.carc_alert;
  j["pyro"] = p.predicted_pyrophoric;
  j["ghs"] = std::vector<std::string>(p.ghs.begin(), p.ghs.end());
  j["purchasable"] = p.purchasable;
  if (p.price) j["price"] = *p.price;
  j["synth_cost"] = p.synth_cost;
  return j;
}

}  // namespace

json RouteReport::to_json() const {
  json j;
  j["carc"] = carc;
  j["pyro"] = pyro;
  j["ghs_count"] = ghs_count;
  j["ghs_codes"] = std::vector<std::string>(ghs_codes.begin(), ghs_codes.end());
  j["smp"] = smp;
  j["rl"] = rl;
  j["reactions"] = reactions;
  j["starting_materials"] = starting_materials;
  json mols = json::object();
  for (const auto& [name, profile] : molecules) {
    mols[name] = profile_json(profile);
  }
  j["molecules"] = mols;
  return j;
}

RouteReport report_from_json(const json& j) {
  RouteReport r;
  r.carc = j.at("carc").get<double>();
  r.pyro = j.at("pyro").get<int>();
  r.ghs_count = j.at("ghs_count").get<int>();
  if (j.contains("ghs_codes")) {
    for (const json& c : j.at("ghs_codes")) r.ghs_codes.insert(c.get<std::string>());
  }
  r.smp = j.at("smp").get<double>();
  r.rl = j.at("rl").get<int>();
  if (j.contains("reactions")) {
    for (const json& s : j.at("reactions")) r.reactions.push_back(s.get<std::string>());
  }
  if (j.contains("starting_materials")) {
    for (const json& s : j.at("starting_materials")) {
      r.starting_materials.push_back(s.get<std::string>());
    }
  }
  if (j.contains("molecules")) {
    for (auto it = j.at("molecules").begin(); it != j.at("molecules").end(); ++it) {
      MoleculeProfile p;
      const json& m = it.value();
      p.carc_score = m.value("carc_score", 0.5);
      p.carc_alert = m.value("carc_alert", false);
      p.predicted_pyrophoric = m.value("pyro", false);
      if (m.contains("ghs")) {
        for (const json& c : m.at("ghs")) p.ghs.insert(c.get<std::string>());
      }
      p.purchasable = m.value("purchasable", false);
      if (m.contains("price")) p.price = m.at("price").get<double>();
      p.synth_cost = m.value("synth_cost", 0.0);
      r.molecules[it.key()] = std::move(p);
    }
  }
  return r;
}

bool feasibility_check(const Reaction& reaction, const World& world) {
  std::string canonical = canonicalize_reaction(reaction);
  std::vector<ScoredReaction> predicted = expand_retro(world, reaction.product, 10);
  std::size_t limit = std::min<std::size_t>(predicted.size(), 5);
  for (std::size_t i = 0; i < limit; ++i) {
    if (predicted[i].canonical == canonical) return true;
  }
  return false;
}

ValidityVerdict validate_route(const Route& route, const World& world) {
  ValidityVerdict verdict;
  if (route.empty()) {
    verdict.reasons.push_back("EmptyRoute");
    return verdict;
  }

  std::map<std::string, int> produced;
  for (const Reaction& r : route) {
    produced[r.product] += 1;
    for (const std::string& reactant : r.reactants) {
      if (reactant == r.product) {
        verdict.reasons.push_back("Cyclic");
      }
    }
  }
  for (const auto& [mol, count] : produced) {
    if (count > 1) verdict.reasons.push_back("DuplicateProducer:" + mol);
  }

  std::map<std::string, int> consumed;
  for (const Reaction& r : route) {
    for (const std::string& reactant : r.reactants) {
      if (produced.count(reactant)) consumed[reactant] += 1;
    }
  }

  // Exactly one produced molecule (the target) is never consumed; every
  // other intermediate is consumed by exactly one reaction.
  int roots = 0;
  for (const auto& [mol, count] : produced) {
    (void)count;
    auto it = consumed.find(mol);
    if (it == consumed.end()) {
      ++roots;
    } else if (it->second > 1) {
      verdict.reasons.push_back("SharedIntermediate:" + mol);
    }
  }
  if (roots != 1) verdict.reasons.push_back("UnconsumedProduct");

  for (const Reaction& r : route) {
    for (const std::string& reactant : r.reactants) {
      if (!produced.count(reactant) && !world.purchasable(reactant)) {
        verdict.reasons.push_back("UnpurchasableLeaf:" + reactant);
      }
    }
  }

  for (const Reaction& r : route) {
    if (!feasibility_check(r, world)) {
      verdict.reasons.push_back("InfeasibleReaction:" + canonicalize_reaction(r));
    }
  }

  std::sort(verdict.reasons.begin(), verdict.reasons.end());
  verdict.reasons.erase(std::unique(verdict.reasons.begin(), verdict.reasons.end()),
                        verdict.reasons.end());
  verdict.valid = verdict.reasons.empty();
  return verdict;
}

RouteReport build_report(const Route& route, const World& world,
                         bool smp_per_occurrence) {
  ValidityVerdict verdict = validate_route(route, world);
  if (!verdict.valid) {
    std::string why;
    for (const std::string& r : verdict.reasons) {
      if (!why.empty()) why += ", ";
      why += r;
    }
    raise(Errc::invalid_route, why);
  }
  return route_metrics(route, world, smp_per_occurrence);
}

RouteReport route_metrics(const Route& route, const World& world,
                          bool smp_per_occurrence) {
  RouteReport report;
  report.rl = static_cast<int>(route.size());

  std::set<std::string> produced;
  for (const Reaction& r : route) produced.insert(r.product);

  for (const Reaction& r : route) {
    report.reactions.push_back(canonicalize_reaction(r));
    for (const std::string& m : reaction_molecules(r)) {
      if (!report.molecules.count(m)) {
        report.molecules[m] = annotate(world, m);
      }
    }
  }

  std::vector<std::string> leaves;
  for (const Reaction& r : route) {
    for (const std::string& reactant : r.reactants) {
      if (!produced.count(reactant)) leaves.push_back(reactant);
    }
  }
  std::set<std::string> unique_leaves(leaves.begin(), leaves.end());
  report.starting_materials.assign(unique_leaves.begin(), unique_leaves.end());

  if (smp_per_occurrence) {
    for (const std::string& leaf : leaves) {
      report.smp += report.molecules.at(leaf).price.value_or(0.0);
    }
  } else {
    for (const std::string& leaf : unique_leaves) {
      report.smp += report.molecules.at(leaf).price.value_or(0.0);
    }
  }

  for (const auto& [name, profile] : report.molecules) {
    (void)name;
    report.carc = std::max(report.carc, profile.carc_score);
    if (profile.predicted_pyrophoric) report.pyro = 1;
    for (const std::string& code : profile.ghs) report.ghs_codes.insert(code);
  }
  report.ghs_count = static_cast<int>(report.ghs_codes.size());
  return report;
}

json partial_report_json(const std::string& id, const RouteState& state,
                         double value, const World& world) {
  json j;
  j["id"] = id;
  j["reactions"] = state.reactions;
  j["open_molecules"] = state.frontier;
  j["value"] = value;

  double carc = 0.0;
  int pyro = 0;
  std::set<std::string> ghs;
  double bb_price = 0.0;
  json mols = json::object();
  for (const std::string& rxn : state.reactions) {
    Reaction r = parse_reaction(rxn);
    for (const std::string& m : reaction_molecules(r)) {
      if (mols.contains(m)) continue;
      MoleculeProfile p = annotate(world, m);
      mols[m] = profile_json(p);
      carc = std::max(carc, p.carc_score);
      if (p.predicted_pyrophoric) pyro = 1;
      for (const std::string& code : p.ghs) ghs.insert(code);
      if (p.purchasable && p.price) bb_price += *p.price;
    }
  }
  j["molecules"] = mols;
  j["metrics_so_far"] = {{"carc", carc},
                         {"pyro", pyro},
                         {"ghs_count", ghs.size()},
                         {"bb_price", bb_price},
                         {"rl", state.reactions.size()}};
  return j;
}

ConstraintResult check_constraints(const Route& route,
                                   const std::vector<Constraint>& constraints,
                                   const World& world) {
  std::set<std::string> molecules;
  for (const Reaction& r : route) {
    for (const std::string& m : reaction_molecules(r)) molecules.insert(m);
  }

  ConstraintResult result;
  for (const Constraint& c : constraints) {
    ConstraintViolation violation{c.type, {}};
    switch (c.type) {
      case Constraint::Type::carcinogen:
        for (const std::string& m : molecules) {
          if (annotate(world, m).truth_carcinogen) violation.molecules.push_back(m);
        }
        break;
      case Constraint::Type::pyrophoric:
        for (const std::string& m : molecules) {
          if (annotate(world, m).truth_pyrophoric) violation.molecules.push_back(m);
        }
        break;
      case Constraint::Type::user:
        for (const std::string& m : c.molecules) {
          if (molecules.count(m)) violation.molecules.push_back(m);
        }
        break;
    }
    if (!violation.molecules.empty()) {
      result.satisfied = false;
      result.violations.push_back(std::move(violation));
    }
  }
  return result;
}

bool dominates(const RouteReport& a, const RouteReport& b) {
  bool le = a.carc <= b.carc && a.pyro <= b.pyro && a.ghs_count <= b.ghs_count &&
            a.smp <= b.smp && a.rl <= b.rl;
  bool strict = a.carc < b.carc || a.pyro < b.pyro || a.ghs_count < b.ghs_count ||
                a.smp < b.smp || a.rl < b.rl;
  return le && strict;
}

bool dominates_or_equal(const RouteReport& a, const RouteReport& b) {
  return a.carc <= b.carc && a.pyro <= b.pyro && a.ghs_count <= b.ghs_count &&
         a.smp <= b.smp && a.rl <= b.rl;
}

std::vector<std::size_t> pareto_front(const std::vector<RouteReport>& reports) {
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < reports.size() && !dominated; ++j) {
      if (j != i && dominates(reports[j], reports[i])) dominated = true;
    }
    if (!dominated) front.push_back(i);
  }
  return front;
}

std::string route_key(const Route& route) {
  std::vector<std::string> keys;
  keys.reserve(route.size());
  for (const Reaction& r : route) keys.push_back(canonicalize_reaction(r));
  std::sort(keys.begin(), keys.end());
  std::string out;
  for (const std::string& k : keys) {
    out += k;
    out += '\n';
  }
  return out;
}

namespace {

struct BruteForcer {
  const World& world;
  int max_depth;
  std::size_t node_cap;
  std::size_t nodes = 0;

  void tick() {
    if (++nodes > node_cap) {
      raise(Errc::budget_exceeded, "enumeration exceeded " + std::to_string(node_cap) +
                                       " nodes");
    }
  }

  // All complete sub-routes solving `molecule` starting at branch depth
  // `depth` (the depth its producing reaction would have).
  std::vector<Route> solve(const std::string& molecule, int depth,
                           std::set<std::string>& path) {
    tick();
    std::vector<Route> out;
    if (depth > max_depth) return out;
    for (const ScoredReaction& sr : expand_retro(world, molecule)) {
      bool cyclic = false;
      for (const std::string& reactant : sr.reaction.reactants) {
        if (path.count(reactant)) {
          cyclic = true;
          break;
        }
      }
      if (cyclic) continue;

      // Combine complete routes for every non-purchasable reactant.
      std::vector<Route> partials{{sr.reaction}};
      bool dead = false;
      for (const std::string& reactant : sr.reaction.reactants) {
        if (world.purchasable(reactant)) continue;
        path.insert(reactant);
        std::vector<Route> sub = solve(reactant, depth + 1, path);
        path.erase(reactant);
        if (sub.empty()) {
          dead = true;
          break;
        }
        std::vector<Route> next;
        for (const Route& base : partials) {
          for (const Route& extra : sub) {
            Route merged = base;
            bool clash = false;
            std::set<std::string> products;
            for (const Reaction& r : merged) products.insert(r.product);
            for (const Reaction& r : extra) {
              if (!products.insert(r.product).second) {
                clash = true;  // same intermediate produced twice
                break;
              }
              merged.push_back(r);
            }
            if (!clash) next.push_back(std::move(merged));
            tick();
          }
        }
        partials = std::move(next);
        if (partials.empty()) {
          dead = true;
          break;
        }
      }
      if (dead) continue;
      for (Route& r : partials) out.push_back(std::move(r));
    }
    return out;
  }
};

}  // namespace

std::vector<Route> brute_force_routes(const World& world, const std::string& product,
                                      int max_depth, std::size_t node_cap) {
  if (max_depth < 1) raise(Errc::invalid_argument, "max_depth must be >= 1");
  BruteForcer bf{world, max_depth, node_cap};
  std::set<std::string> path{product};
  std::vector<Route> routes = bf.solve(product, 1, path);

  // Deduplicate by reaction set, keep only routes that pass the full
  // validity check, and fix a deterministic order.
  std::map<std::string, Route> unique;
  for (Route& r : routes) {
    if (!validate_route(r, world).valid) continue;
    unique.emplace(route_key(r), std::move(r));
  }
  routes.clear();
  for (auto& [key, r] : unique) {
    (void)key;
    routes.push_back(std::move(r));
  }
  std::sort(routes.begin(), routes.end(), [](const Route& a, const Route& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return route_key(a) < route_key(b);
  });
  return routes;
}

}  // namespace mmorf
