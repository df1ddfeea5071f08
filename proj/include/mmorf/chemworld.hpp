#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mmorf/error.hpp"

namespace mmorf {

// Molecules are canonical token strings: lowercase [a-z0-9]+ tokens joined
// by single '-' separators, e.g. "ac-acid". canonicalize_molecule() is the
// only way to produce one from raw input.

std::string canonicalize_molecule(const std::string& raw);
bool is_canonical_molecule(const std::string& text);
std::vector<std::string> molecule_tokens(const std::string& molecule);
int token_count(const std::string& molecule);

struct Reaction {
  std::vector<std::string> reactants;
  std::string product;

  bool operator==(const Reaction&) const = default;
};

using Route = std::vector<Reaction>;

/// Reactants sorted and joined with '.', then ">>", then the product.
std::string canonicalize_reaction(const std::vector<std::string>& reactants,
                                  const std::string& product);
std::string canonicalize_reaction(const Reaction& reaction);

/// Inverse of canonicalize_reaction for strings produced by it.
Reaction parse_reaction(const std::string& canonical);

/// All molecules of a reaction: reactants then product.
std::vector<std::string> reaction_molecules(const Reaction& reaction);

// A pattern is a token sequence where at most one element is the variable
// "$X" (named) or "*" (anonymous, match-only). A binding maps the variable
// name to the bound token subsequence; exact matches and "*" matches yield
// an empty binding.
using Binding = std::map<std::string, std::string>;

std::vector<Binding> match_pattern(const std::string& pattern,
                                   const std::string& molecule);

/// Lenient variant used for restriction patterns: subjects and patterns are
/// tokenized on '-' only, so reaction canonical strings (which contain '.'
/// and '>') can be matched as well. Malformed inputs simply never match.
bool pattern_matches_loose(const std::string& pattern,
                           const std::string& subject);

/// Fixed-width bit vector with popcount-based similarity.
class Bitvec {
public:
  explicit Bitvec(std::size_t nbits = 2048);

  void set(std::size_t index);
  bool test(std::size_t index) const;
  std::size_t size() const { return nbits_; }
  std::size_t count() const;

  bool operator==(const Bitvec&) const = default;

  friend double tanimoto(const Bitvec& a, const Bitvec& b);

private:
  std::vector<std::uint64_t> words_;
  std::size_t nbits_;
};

/// |a AND b| / |a OR b|; defined as 1 when both vectors are empty.
double tanimoto(const Bitvec& a, const Bitvec& b);

std::uint64_t fnv1a64(const std::string& bytes);

/// Bits set at fnv1a64(token) mod 2048 for each token and each
/// "left|right" adjacent-token bigram.
Bitvec fingerprint(const std::string& molecule);

struct MoleculeProfile {
  double carc_score = 0.5;
  bool carc_alert = false;
  bool truth_carcinogen = false;
  bool truth_pyrophoric = false;
  std::set<std::string> ghs;
  bool purchasable = false;
  double synth_cost = 0.0;
  std::optional<double> price;
  bool predicted_pyrophoric = false;  // derived, never stored
};

struct ReactionTemplate {
  std::string id;
  std::string product_pattern;
  std::vector<std::string> reactant_patterns;
  double plausibility = 0.0;
};

struct ScoredReaction {
  Reaction reaction;
  std::string canonical;
  double plausibility = 0.0;
};

struct World {
  std::map<std::string, MoleculeProfile> molecules;
  // product -> list of (reactants, plausibility)
  std::map<std::string, std::vector<std::pair<std::vector<std::string>, double>>>
      explicit_reactions;
  std::vector<ReactionTemplate> templates;
  std::map<std::string, double> building_blocks;
  std::vector<std::string> pyrophoric_refs;

  bool purchasable(const std::string& molecule) const;
  std::optional<double> price(const std::string& molecule) const;
};

World load_world(const std::string& path);
World world_from_json_text(const std::string& text);

/// Stored profile merged with catalog data, or defaults for unknown
/// molecules (carc_score 0.5, synth_cost = token count). Pyrophoricity
/// prediction is fingerprint identity with any reference entry.
MoleculeProfile annotate(const World& world, const std::string& molecule);

/// Union of explicit reactions and template instantiations producing
/// `molecule`, deduplicated by canonical string (highest plausibility kept),
/// sorted by plausibility descending then canonical string, truncated to
/// `branching`.
std::vector<ScoredReaction> expand_retro(const World& world,
                                         const std::string& molecule,
                                         int branching = 10);

}  // namespace mmorf
