#include "mmorf/restrictions.hpp"

#include <algorithm>
#include <map>

namespace mmorf {

bool RestrictionSet::blocks_molecule(const std::string& molecule) const {
  if (molecules.count(molecule)) return true;
  for (const std::string& p : reaction_patterns) {
    if (pattern_matches_loose(p, molecule)) return true;
  }
  return false;
}

bool RestrictionSet::blocks_reaction(const Reaction& reaction,
                                     const std::string& canonical,
                                     int reaction_depth) const {
  if (depth_limit >= 0 && reaction_depth > 0 && reaction_depth > depth_limit) {
    return true;
  }
  if (specific_reactions.count(canonical)) return true;
  for (const std::string& m : reaction_molecules(reaction)) {
    if (molecules.count(m)) return true;
  }
  for (const std::string& p : reaction_patterns) {
    if (pattern_matches_loose(p, canonical)) return true;
    for (const std::string& m : reaction_molecules(reaction)) {
      if (pattern_matches_loose(p, m)) return true;
    }
  }
  return false;
}

bool RestrictionSet::blocks_route(const Route& route) const {
  std::vector<int> depths = reaction_depths(route);
  for (std::size_t i = 0; i < route.size(); ++i) {
    if (blocks_reaction(route[i], canonicalize_reaction(route[i]), depths[i])) {
      return true;
    }
  }
  return false;
}

nlohmann::json RestrictionSet::to_json() const {
  nlohmann::json j;
  j["molecules"] = std::vector<std::string>(molecules.begin(), molecules.end());
  j["specific_reactions"] =
      std::vector<std::string>(specific_reactions.begin(), specific_reactions.end());
  j["reaction_templates"] =
      std::vector<std::string>(reaction_patterns.begin(), reaction_patterns.end());
  j["depth_limit"] = depth_limit;
  return j;
}

void merge_delta(RestrictionSet& set, const RestrictionDelta& delta) {
  for (const std::string& m : delta.add_molecules) set.molecules.insert(m);
  for (const std::string& m : delta.remove_molecules) set.molecules.erase(m);
  for (const std::string& r : delta.add_reactions) set.specific_reactions.insert(r);
  for (const std::string& r : delta.remove_reactions) set.specific_reactions.erase(r);
  for (const std::string& p : delta.add_patterns) set.reaction_patterns.insert(p);
  for (const std::string& p : delta.remove_patterns) set.reaction_patterns.erase(p);
  if (delta.depth_limit) set.depth_limit = *delta.depth_limit;
}

std::vector<int> reaction_depths(const Route& route) {
  std::vector<int> depths(route.size(), 1);
  // product -> index of the reaction that produces it
  std::map<std::string, std::size_t> producer;
  for (std::size_t i = 0; i < route.size(); ++i) {
    producer.emplace(route[i].product, i);
  }
  // consumer lookup: reaction whose reactant list contains the product
  for (std::size_t i = 0; i < route.size(); ++i) {
    int depth = 1;
    std::string current = route[i].product;
    // walk up to the root; routes are finite and acyclic in practice, but
    // guard against malformed input with a step cap
    std::size_t steps = 0;
    bool found_parent = true;
    while (found_parent && steps <= route.size()) {
      found_parent = false;
      for (std::size_t j = 0; j < route.size(); ++j) {
        const Reaction& candidate = route[j];
        if (std::find(candidate.reactants.begin(), candidate.reactants.end(),
                      current) != candidate.reactants.end()) {
          depth += 1;
          current = candidate.product;
          found_parent = true;
          break;
        }
      }
      ++steps;
    }
    depths[i] = depth;
  }
  return depths;
}

}  // namespace mmorf
