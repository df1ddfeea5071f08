#include "mmorf/chemworld.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "json.hpp"

namespace mmorf {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::empty_molecule: return "EmptyMolecule";
    case Errc::illegal_character: return "IllegalCharacter";
    case Errc::no_reactants: return "NoReactants";
    case Errc::malformed_pattern: return "MalformedPattern";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::parse_error: return "ParseError";
    case Errc::schema_violation: return "SchemaViolation";
    case Errc::syntax_error: return "SyntaxError";
    case Errc::unknown_component: return "UnknownComponent";
    case Errc::forbidden_operator: return "ForbiddenOperator";
    case Errc::bad_argument: return "BadArgument";
    case Errc::division_by_zero: return "DivisionByZero";
    case Errc::purchasable_target: return "PurchasableTarget";
    case Errc::unknown_system: return "UnknownSystem";
    case Errc::frontier_empty: return "FrontierEmpty";
    case Errc::incomplete_assignment: return "IncompleteAssignment";
    case Errc::unknown_template: return "UnknownTemplate";
    case Errc::missing_placeholder: return "MissingPlaceholder";
    case Errc::no_action_found: return "NoActionFound";
    case Errc::unknown_tool: return "UnknownTool";
    case Errc::malformed_arguments: return "MalformedArguments";
    case Errc::disallowed_tool: return "DisallowedTool";
    case Errc::scenario_exhausted: return "ScenarioExhausted";
    case Errc::http_error: return "HttpError";
    case Errc::timeout: return "Timeout";
    case Errc::invalid_route: return "InvalidRoute";
    case Errc::unknown_constraint_type: return "UnknownConstraintType";
    case Errc::malformed_entry: return "MalformedEntry";
    case Errc::budget_exceeded: return "BudgetExceeded";
    case Errc::not_found: return "NotFound";
    case Errc::invalid_argument: return "InvalidArgument";
  }
  return "UnknownError";
}

namespace {

bool is_token_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string canonicalize_molecule(const std::string& raw) {
  std::string lowered = trim(raw);
  if (lowered.empty()) raise(Errc::empty_molecule, "molecule text is empty");
  for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (char c : lowered) {
    if (!is_token_char(c) && c != '-') {
      raise(Errc::illegal_character,
            std::string("character '") + c + "' not allowed in molecule '" + raw + "'");
    }
  }
  std::vector<std::string> tokens;
  for (const std::string& t : split(lowered, '-')) {
    if (!t.empty()) tokens.push_back(t);
  }
  if (tokens.empty()) raise(Errc::empty_molecule, "molecule '" + raw + "' has no tokens");
  std::string out = tokens[0];
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    out += '-';
    out += tokens[i];
  }
  return out;
}

bool is_canonical_molecule(const std::string& text) {
  if (text.empty() || text.front() == '-' || text.back() == '-') return false;
  bool prev_sep = true;
  for (char c : text) {
    if (c == '-') {
      if (prev_sep) return false;
      prev_sep = true;
    } else if (is_token_char(c)) {
      prev_sep = false;
    } else {
      return false;
    }
  }
  return !prev_sep;
}

std::vector<std::string> molecule_tokens(const std::string& molecule) {
  std::vector<std::string> out;
  for (const std::string& t : split(molecule, '-')) {
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

int token_count(const std::string& molecule) {
  return static_cast<int>(molecule_tokens(molecule).size());
}

std::string canonicalize_reaction(const std::vector<std::string>& reactants,
                                  const std::string& product) {
  if (reactants.empty()) raise(Errc::no_reactants, "reaction for '" + product + "'");
  std::vector<std::string> sorted = reactants;
  std::sort(sorted.begin(), sorted.end());
  std::string out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i) out += '.';
    out += sorted[i];
  }
  out += ">>";
  out += product;
  return out;
}

std::string canonicalize_reaction(const Reaction& reaction) {
  return canonicalize_reaction(reaction.reactants, reaction.product);
}

Reaction parse_reaction(const std::string& canonical) {
  std::size_t pos = canonical.find(">>");
  if (pos == std::string::npos) {
    raise(Errc::parse_error, "not a reaction string: '" + canonical + "'");
  }
  Reaction r;
  r.product = canonical.substr(pos + 2);
  for (const std::string& m : split(canonical.substr(0, pos), '.')) {
    if (!m.empty()) r.reactants.push_back(m);
  }
  if (r.reactants.empty()) raise(Errc::no_reactants, canonical);
  return r;
}

std::vector<std::string> reaction_molecules(const Reaction& reaction) {
  std::vector<std::string> out = reaction.reactants;
  out.push_back(reaction.product);
  return out;
}

namespace {

bool is_variable(const std::string& token) { return token == "$X" || token == "*"; }

// Single-variable token-sequence match. Pattern and subject are already
// tokenized; the variable binds a non-empty contiguous run of subject
// tokens. Returns true and fills `bound` on success.
bool match_tokens(const std::vector<std::string>& pattern,
                  const std::vector<std::string>& subject,
                  std::string* var_name, std::vector<std::string>* bound) {
  int var_at = -1;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (is_variable(pattern[i])) {
      if (var_at >= 0) raise(Errc::malformed_pattern, "more than one variable");
      var_at = static_cast<int>(i);
    }
  }
  if (var_at < 0) {
    if (pattern == subject) {
      var_name->clear();
      bound->clear();
      return true;
    }
    return false;
  }
  std::size_t prefix = static_cast<std::size_t>(var_at);
  std::size_t suffix = pattern.size() - prefix - 1;
  if (subject.size() < prefix + suffix + 1) return false;
  for (std::size_t i = 0; i < prefix; ++i) {
    if (pattern[i] != subject[i]) return false;
  }
  for (std::size_t i = 0; i < suffix; ++i) {
    if (pattern[pattern.size() - 1 - i] != subject[subject.size() - 1 - i]) return false;
  }
  *var_name = pattern[prefix] == "*" ? std::string() : std::string("X");
  bound->assign(subject.begin() + prefix, subject.end() - suffix);
  return true;
}

std::vector<std::string> pattern_tokens_checked(const std::string& pattern) {
  std::vector<std::string> tokens;
  for (const std::string& t : split(pattern, '-')) {
    if (t.empty()) raise(Errc::malformed_pattern, "empty token in pattern '" + pattern + "'");
    tokens.push_back(t);
  }
  // "$X-foo" splits "$X" cleanly; reject any other use of '$' or '*'.
  for (const std::string& t : tokens) {
    if (is_variable(t)) continue;
    for (char c : t) {
      if (!is_token_char(c)) {
        raise(Errc::malformed_pattern,
              std::string("character '") + c + "' in pattern '" + pattern + "'");
      }
    }
  }
  return tokens;
}

}  // namespace

std::vector<Binding> match_pattern(const std::string& pattern,
                                   const std::string& molecule) {
  std::vector<std::string> ptoks = pattern_tokens_checked(pattern);
  int vars = 0;
  for (const std::string& t : ptoks) {
    if (is_variable(t)) ++vars;
  }
  if (vars > 1) raise(Errc::malformed_pattern, "two variables in '" + pattern + "'");

  std::vector<std::string> mtoks = molecule_tokens(molecule);
  std::string name;
  std::vector<std::string> bound;
  std::vector<Binding> out;
  if (match_tokens(ptoks, mtoks, &name, &bound)) {
    Binding b;
    if (!name.empty()) {
      std::string joined = bound[0];
      for (std::size_t i = 1; i < bound.size(); ++i) joined += "-" + bound[i];
      b[name] = joined;
    }
    out.push_back(std::move(b));
  }
  return out;
}

bool pattern_matches_loose(const std::string& pattern, const std::string& subject) {
  std::vector<std::string> ptoks, stoks;
  for (const std::string& t : split(pattern, '-')) {
    if (t.empty()) return false;
    ptoks.push_back(t);
  }
  int vars = 0;
  for (const std::string& t : ptoks) {
    if (is_variable(t)) ++vars;
  }
  if (vars > 1) return false;
  for (const std::string& t : split(subject, '-')) {
    if (t.empty()) return false;
    stoks.push_back(t);
  }
  std::string name;
  std::vector<std::string> bound;
  try {
    return match_tokens(ptoks, stoks, &name, &bound);
  } catch (const Error&) {
    return false;
  }
}

Bitvec::Bitvec(std::size_t nbits)
    : words_((nbits + 63) / 64, 0), nbits_(nbits) {}

void Bitvec::set(std::size_t index) {
  words_[index / 64] |= (std::uint64_t{1} << (index % 64));
}

bool Bitvec::test(std::size_t index) const {
  return (words_[index / 64] >> (index % 64)) & 1;
}

std::size_t Bitvec::count() const {
  std::size_t n = 0;
  for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

double tanimoto(const Bitvec& a, const Bitvec& b) {
  if (a.nbits_ != b.nbits_) {
    raise(Errc::length_mismatch, "bit vectors of different length");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.words_.size(); ++i) {
    inter += static_cast<std::size_t>(std::popcount(a.words_[i] & b.words_[i]));
    uni += static_cast<std::size_t>(std::popcount(a.words_[i] | b.words_[i]));
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Bitvec fingerprint(const std::string& molecule) {
  Bitvec fp(2048);
  std::vector<std::string> tokens = molecule_tokens(molecule);
  for (const std::string& t : tokens) {
    fp.set(fnv1a64(t) % 2048);
  }
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    fp.set(fnv1a64(tokens[i] + "|" + tokens[i + 1]) % 2048);
  }
  return fp;
}

bool World::purchasable(const std::string& molecule) const {
  return building_blocks.count(molecule) > 0;
}

std::optional<double> World::price(const std::string& molecule) const {
  auto it = building_blocks.find(molecule);
  if (it == building_blocks.end()) return std::nullopt;
  return it->second;
}

MoleculeProfile annotate(const World& world, const std::string& molecule) {
  MoleculeProfile profile;
  auto it = world.molecules.find(molecule);
  if (it != world.molecules.end()) {
    profile = it->second;
  }
  if (profile.synth_cost <= 0.0) {
    profile.synth_cost = static_cast<double>(token_count(molecule));
  }
  profile.purchasable = world.purchasable(molecule);
  profile.price = world.price(molecule);

  Bitvec fp = fingerprint(molecule);
  profile.predicted_pyrophoric = false;
  for (const std::string& ref : world.pyrophoric_refs) {
    if (tanimoto(fp, fingerprint(ref)) == 1.0) {
      profile.predicted_pyrophoric = true;
      break;
    }
  }
  return profile;
}

namespace {

std::string instantiate_pattern(const std::string& pattern, const Binding& binding) {
  std::vector<std::string> tokens;
  for (const std::string& t : split(pattern, '-')) {
    if (t.empty()) continue;
    if (t == "$X") {
      tokens.push_back(binding.at("X"));
    } else {
      tokens.push_back(t);
    }
  }
  std::string out = tokens[0];
  for (std::size_t i = 1; i < tokens.size(); ++i) out += "-" + tokens[i];
  return out;
}

}  // namespace

std::vector<ScoredReaction> expand_retro(const World& world,
                                         const std::string& molecule,
                                         int branching) {
  // canonical string -> best plausibility
  std::map<std::string, std::pair<Reaction, double>> found;

  auto add = [&](Reaction r, double plausibility) {
    for (const std::string& reactant : r.reactants) {
      if (reactant == r.product) return;  // degenerate self-loop
    }
    std::string key = canonicalize_reaction(r);
    auto it = found.find(key);
    if (it == found.end() || plausibility > it->second.second) {
      found[key] = {std::move(r), plausibility};
    }
  };

  auto eit = world.explicit_reactions.find(molecule);
  if (eit != world.explicit_reactions.end()) {
    for (const auto& [reactants, plausibility] : eit->second) {
      add(Reaction{reactants, molecule}, plausibility);
    }
  }

  for (const ReactionTemplate& tpl : world.templates) {
    for (const Binding& binding : match_pattern(tpl.product_pattern, molecule)) {
      Reaction r;
      r.product = molecule;
      bool ok = true;
      for (const std::string& rp : tpl.reactant_patterns) {
        try {
          r.reactants.push_back(instantiate_pattern(rp, binding));
        } catch (const std::out_of_range&) {
          ok = false;  // unbound variable; load-time validation should prevent this
          break;
        }
      }
      if (ok && !r.reactants.empty()) add(std::move(r), tpl.plausibility);
    }
  }

  std::vector<ScoredReaction> out;
  out.reserve(found.size());
  for (auto& [key, entry] : found) {
    out.push_back(ScoredReaction{std::move(entry.first), key, entry.second});
  }
  std::sort(out.begin(), out.end(), [](const ScoredReaction& a, const ScoredReaction& b) {
    if (a.plausibility != b.plausibility) return a.plausibility > b.plausibility;
    return a.canonical < b.canonical;
  });
  if (branching >= 0 && out.size() > static_cast<std::size_t>(branching)) {
    out.resize(static_cast<std::size_t>(branching));
  }
  return out;
}

namespace {

using nlohmann::json;

[[noreturn]] void schema_fail(const std::string& path, const std::string& what) {
  raise(Errc::schema_violation, path + ": " + what);
}

std::string canonical_or_fail(const json& j, const std::string& path) {
  if (!j.is_string()) schema_fail(path, "expected a string");
  std::string s = j.get<std::string>();
  if (!is_canonical_molecule(s)) schema_fail(path, "'" + s + "' is not canonical");
  return s;
}

double number_or_fail(const json& j, const std::string& path) {
  if (!j.is_number()) schema_fail(path, "expected a number");
  return j.get<double>();
}

const std::regex kGhsCode("H[0-9]{3}");

World world_from_json(const json& root) {
  if (!root.is_object()) raise(Errc::parse_error, "world file is not a JSON object");
  World world;

  if (root.contains("molecules")) {
    const json& mols = root.at("molecules");
    if (!mols.is_object()) schema_fail("molecules", "expected an object");
    for (auto it = mols.begin(); it != mols.end(); ++it) {
      std::string name = it.key();
      std::string path = "molecules." + name;
      if (!is_canonical_molecule(name)) schema_fail(path, "key is not canonical");
      const json& m = it.value();
      if (!m.is_object()) schema_fail(path, "expected an object");
      MoleculeProfile p;
      if (m.contains("carc_score")) {
        p.carc_score = number_or_fail(m.at("carc_score"), path + ".carc_score");
        if (p.carc_score < 0.0 || p.carc_score > 1.0) {
          schema_fail(path + ".carc_score", "must be in [0,1]");
        }
      }
      if (m.contains("carc_alert")) p.carc_alert = m.at("carc_alert").get<bool>();
      if (m.contains("truth_carcinogen")) p.truth_carcinogen = m.at("truth_carcinogen").get<bool>();
      if (m.contains("truth_pyrophoric")) p.truth_pyrophoric = m.at("truth_pyrophoric").get<bool>();
      if (m.contains("ghs")) {
        for (const json& code : m.at("ghs")) {
          std::string c = code.get<std::string>();
          if (!std::regex_match(c, kGhsCode)) {
            schema_fail(path + ".ghs", "'" + c + "' is not an H-code");
          }
          p.ghs.insert(c);
        }
      }
      if (m.contains("synth_cost")) {
        p.synth_cost = number_or_fail(m.at("synth_cost"), path + ".synth_cost");
        if (p.synth_cost < 0.0) schema_fail(path + ".synth_cost", "must be nonnegative");
      }
      world.molecules[name] = std::move(p);
    }
  }

  if (root.contains("building_blocks")) {
    const json& bbs = root.at("building_blocks");
    if (!bbs.is_object()) schema_fail("building_blocks", "expected an object");
    for (auto it = bbs.begin(); it != bbs.end(); ++it) {
      std::string path = "building_blocks." + it.key();
      if (!is_canonical_molecule(it.key())) schema_fail(path, "key is not canonical");
      double price = number_or_fail(it.value(), path);
      if (!(price >= 0.0) || !std::isfinite(price)) {
        schema_fail(path, "price must be a finite nonnegative number");
      }
      world.building_blocks[it.key()] = price;
    }
  }

  if (root.contains("reactions")) {
    const json& rxns = root.at("reactions");
    if (!rxns.is_array()) schema_fail("reactions", "expected an array");
    int idx = 0;
    for (const json& r : rxns) {
      std::string path = "reactions[" + std::to_string(idx) + "]";
      if (!r.is_object() || !r.contains("product") || !r.contains("reactants") ||
          !r.contains("plausibility")) {
        schema_fail(path, "needs product, reactants, plausibility");
      }
      std::string product = canonical_or_fail(r.at("product"), path + ".product");
      std::vector<std::string> reactants;
      for (const json& m : r.at("reactants")) {
        std::string s = canonical_or_fail(m, path + ".reactants");
        if (s == product) schema_fail(path, "product appears among its own reactants");
        reactants.push_back(s);
      }
      if (reactants.empty()) schema_fail(path + ".reactants", "must be non-empty");
      double pl = number_or_fail(r.at("plausibility"), path + ".plausibility");
      if (!(pl > 0.0 && pl <= 1.0)) schema_fail(path + ".plausibility", "must be in (0,1]");
      world.explicit_reactions[product].push_back({std::move(reactants), pl});
      ++idx;
    }
  }

  if (root.contains("templates")) {
    const json& tpls = root.at("templates");
    if (!tpls.is_array()) schema_fail("templates", "expected an array");
    int idx = 0;
    for (const json& t : tpls) {
      std::string path = "templates[" + std::to_string(idx) + "]";
      if (!t.is_object() || !t.contains("id") || !t.contains("product") ||
          !t.contains("reactants") || !t.contains("plausibility")) {
        schema_fail(path, "needs id, product, reactants, plausibility");
      }
      ReactionTemplate tpl;
      tpl.id = t.at("id").get<std::string>();
      tpl.product_pattern = t.at("product").get<std::string>();
      std::vector<std::string> ptoks;
      try {
        ptoks = pattern_tokens_checked(tpl.product_pattern);
      } catch (const Error& e) {
        schema_fail(path + ".product", e.what());
      }
      int vars = 0;
      for (const std::string& tok : ptoks) {
        if (tok == "$X" || tok == "*") ++vars;
      }
      if (vars > 1) schema_fail(path + ".product", "more than one variable");
      bool product_has_var = vars == 1;
      for (const json& rp : t.at("reactants")) {
        std::string s = rp.get<std::string>();
        bool uses_var = false;
        try {
          for (const std::string& tok : pattern_tokens_checked(s)) {
            if (tok == "$X") uses_var = true;
          }
        } catch (const Error& e) {
          schema_fail(path + ".reactants", e.what());
        }
        if (uses_var && !product_has_var) {
          schema_fail(path, "reactant variable does not appear in product pattern");
        }
        tpl.reactant_patterns.push_back(std::move(s));
      }
      if (tpl.reactant_patterns.empty()) schema_fail(path + ".reactants", "must be non-empty");
      tpl.plausibility = number_or_fail(t.at("plausibility"), path + ".plausibility");
      if (!(tpl.plausibility > 0.0 && tpl.plausibility <= 1.0)) {
        schema_fail(path + ".plausibility", "must be in (0,1]");
      }
      world.templates.push_back(std::move(tpl));
      ++idx;
    }
  }

  if (root.contains("pyrophoric_refs")) {
    for (const json& r : root.at("pyrophoric_refs")) {
      world.pyrophoric_refs.push_back(canonical_or_fail(r, "pyrophoric_refs"));
    }
  }

  return world;
}

}  // namespace

World world_from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    raise(Errc::parse_error, e.what());
  }
  return world_from_json(root);
}

World load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::parse_error, "cannot open world file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return world_from_json_text(buf.str());
}

}  // namespace mmorf
