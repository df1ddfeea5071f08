#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmorf/chemworld.hpp"

namespace mmorf {

/// Active search-space boundaries. Patterns apply both to each molecule of
/// a reaction and to the reaction's canonical string (tokenized on '-').
/// depth_limit of -1 means no limit.
struct RestrictionSet {
  std::set<std::string> molecules;
  std::set<std::string> specific_reactions;
  std::set<std::string> reaction_patterns;
  int depth_limit = -1;

  bool empty() const {
    return molecules.empty() && specific_reactions.empty() &&
           reaction_patterns.empty() && depth_limit < 0;
  }

  bool blocks_molecule(const std::string& molecule) const;

  /// reaction_depth is the reaction's step count from the root (root
  /// reaction = 1); pass 0 to skip the depth check.
  bool blocks_reaction(const Reaction& reaction, const std::string& canonical,
                       int reaction_depth) const;

  bool blocks_route(const Route& route) const;

  nlohmann::json to_json() const;
};

/// Accumulated change produced by one Regulator session.
struct RestrictionDelta {
  std::vector<std::string> add_molecules, remove_molecules;
  std::vector<std::string> add_reactions, remove_reactions;
  std::vector<std::string> add_patterns, remove_patterns;
  std::optional<int> depth_limit;  // -1 clears any active limit

  bool empty() const {
    return add_molecules.empty() && remove_molecules.empty() &&
           add_reactions.empty() && remove_reactions.empty() &&
           add_patterns.empty() && remove_patterns.empty() && !depth_limit;
  }
};

/// Applies a delta to a restriction set (set updates only, no pruning).
void merge_delta(RestrictionSet& set, const RestrictionDelta& delta);

/// Branch depth of every reaction in a root-first route: the root reaction
/// is 1, a reaction producing a reactant of a depth-d reaction is d+1.
std::vector<int> reaction_depths(const Route& route);

}  // namespace mmorf
