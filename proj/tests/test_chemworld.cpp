#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <set>

#include "doctest.h"
#include "mmorf/chemworld.hpp"
#include "test_util.hpp"

using namespace mmorf;

namespace {

void check_error(Errc expected, const std::function<void()>& fn) {
  try {
    fn();
    FAIL_CHECK("expected error ", errc_name(expected));
  } catch (const Error& e) {
    CHECK(e.code() == expected);
  }
}

}  // namespace

TEST_CASE("canonicalize_molecule folds case and collapses separators") {
  CHECK(canonicalize_molecule("AC-Acid") == "ac-acid");
  CHECK(canonicalize_molecule("me--oh-") == "me-oh");
  CHECK(canonicalize_molecule("  tgt ") == "tgt");
  check_error(Errc::illegal_character, [] { canonicalize_molecule("ph_cl"); });
  check_error(Errc::empty_molecule, [] { canonicalize_molecule("   "); });
  check_error(Errc::empty_molecule, [] { canonicalize_molecule("---"); });
}

TEST_CASE("canonicalization is idempotent") {
  std::mt19937_64 rng(7);
  const std::string alphabet = "abcz019-";
  for (int i = 0; i < 500; ++i) {
    std::string raw;
    int len = 1 + int(rng() % 12);
    for (int j = 0; j < len; ++j) raw.push_back(alphabet[rng() % alphabet.size()]);
    try {
      std::string once = canonicalize_molecule(raw);
      CHECK(canonicalize_molecule(once) == once);
      CHECK(is_canonical_molecule(once));
    } catch (const Error&) {
      // inputs without any token characters are allowed to fail
    }
  }
}

TEST_CASE("canonicalize_reaction sorts reactants") {
  CHECK(canonicalize_reaction({"me-oh", "ac-acid"}, "ac-ester") ==
        "ac-acid.me-oh>>ac-ester");
  CHECK(canonicalize_reaction({"a"}, "a") == "a>>a");
  check_error(Errc::no_reactants, [] { canonicalize_reaction({}, "x"); });
  Reaction r = parse_reaction("ac-acid.me-oh>>ac-ester");
  CHECK(r.product == "ac-ester");
  CHECK(r.reactants == std::vector<std::string>{"ac-acid", "me-oh"});
}

TEST_CASE("match_pattern binds single variables") {
  auto b = match_pattern("$X-ester", "ac-ester");
  REQUIRE(b.size() == 1);
  CHECK(b[0].at("X") == "ac");

  CHECK(match_pattern("ac-acid", "ac-acid") == std::vector<Binding>{{}});
  CHECK(match_pattern("$X-ester", "ac-acid").empty());
  CHECK(match_pattern("*", "me-oh").size() == 1);
  CHECK(match_pattern("*-oh", "me-oh").size() == 1);
  check_error(Errc::malformed_pattern, [] { match_pattern("$X-$X", "a-b"); });
}

TEST_CASE("match_pattern agrees with exhaustive subsequence enumeration") {
  std::mt19937_64 rng(11);
  std::vector<std::string> tokens = {"a", "b", "c", "x1"};
  for (int trial = 0; trial < 400; ++trial) {
    auto random_molecule = [&](int max_len) {
      int len = 1 + int(rng() % max_len);
      std::string out;
      for (int i = 0; i < len; ++i) {
        if (i) out += "-";
        out += tokens[rng() % tokens.size()];
      }
      return out;
    };
    std::string molecule = random_molecule(5);
    // random pattern: molecule-like, sometimes with a variable spliced in
    std::string pattern = random_molecule(3);
    if (rng() % 2) {
      std::vector<std::string> ptoks = molecule_tokens(pattern);
      ptoks[rng() % ptoks.size()] = "$X";
      pattern = ptoks[0];
      for (std::size_t i = 1; i < ptoks.size(); ++i) pattern += "-" + ptoks[i];
    }
    std::vector<std::string> expected = oracle::match_by_enumeration(pattern, molecule);
    std::vector<std::string> got;
    for (const Binding& binding : match_pattern(pattern, molecule)) {
      got.push_back(binding.count("X") ? binding.at("X") : "");
    }
    std::sort(got.begin(), got.end());
    CHECK(got == expected);
    // every returned binding reproduces the molecule when instantiated
    for (const Binding& binding : match_pattern(pattern, molecule)) {
      if (!binding.count("X")) continue;
      std::string rebuilt;
      for (const std::string& t : molecule_tokens(pattern)) {
        if (!rebuilt.empty()) rebuilt += "-";
        rebuilt += (t == "$X") ? binding.at("X") : t;
      }
      CHECK(rebuilt == molecule);
    }
  }
}

TEST_CASE("fingerprint sets token and bigram bits at frozen FNV-1a indices") {
  // indices computed independently: fnv1a64(s) % 2048
  Bitvec fp = fingerprint("ac-acid");
  CHECK(fp.test(541));   // "ac"
  CHECK(fp.test(1256));  // "acid"
  CHECK(fp.test(1122));  // "ac|acid"
  CHECK(fp.count() == 3);

  Bitvec single = fingerprint("me");
  CHECK(single.count() == 1);
  CHECK(single.test(167));

  CHECK(fingerprint("zz-qq").test(1301));
  CHECK(fingerprint("zz-qq").test(343));
  CHECK(fingerprint("zz-qq").test(1645));

  CHECK(fingerprint("ac-acid") == fingerprint("ac-acid"));
  CHECK(fnv1a64("ac") == 620446748078610973ULL);
}

TEST_CASE("tanimoto ratio and errors") {
  Bitvec a(2048), b(2048);
  a.set(1); a.set(2); a.set(3);
  b.set(2); b.set(3); b.set(4); b.set(5);
  // |and| = 2, |or| = 5
  CHECK(tanimoto(a, b) == doctest::Approx(0.4));
  CHECK(tanimoto(a, a) == 1.0);
  Bitvec empty1(2048), empty2(2048);
  CHECK(tanimoto(empty1, empty2) == 1.0);
  Bitvec disjoint(2048);
  disjoint.set(9);
  CHECK(tanimoto(a, disjoint) == 0.0);
  Bitvec shorter(64);
  check_error(Errc::length_mismatch, [&] { tanimoto(a, shorter); });
}

TEST_CASE("tanimoto agrees with a set-based oracle on random vectors") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> ia, ib;
    Bitvec a(2048), b(2048);
    for (int i = 0; i < 40; ++i) {
      int bit = int(rng() % 2048);
      if (rng() % 2) { ia.push_back(bit); a.set(bit); }
      else { ib.push_back(bit); b.set(bit); }
    }
    if (ia.empty() || ib.empty()) continue;
    CHECK(tanimoto(a, b) == doctest::Approx(oracle::tanimoto_sets(ia, ib)));
  }
}

TEST_CASE("annotate returns stored profiles and defaults") {
  World world = tiny_world();

  MoleculeProfile ph = annotate(world, "ph-cl");
  CHECK(ph.carc_alert);
  CHECK(ph.ghs == std::set<std::string>{"H351"});
  CHECK(ph.purchasable);
  CHECK(ph.price == 3.0);

  MoleculeProfile unknown = annotate(world, "zz-qq");
  CHECK(unknown.carc_score == 0.5);
  CHECK_FALSE(unknown.carc_alert);
  CHECK_FALSE(unknown.truth_carcinogen);
  CHECK(unknown.ghs.empty());
  CHECK_FALSE(unknown.purchasable);
  CHECK(unknown.synth_cost == 2.0);

  // predicted pyrophoricity = fingerprint identity with a reference entry
  CHECK(annotate(world, "na-h").predicted_pyrophoric);
  CHECK_FALSE(annotate(world, "me-oh").predicted_pyrophoric);
}

TEST_CASE("pyrophoricity prediction is exactly fingerprint-identity membership") {
  World world = tiny_world();
  std::vector<std::string> probes = {"na-h",  "me-oh", "ac-acid", "zz-qq",
                                     "h-na",  "na",    "na-h-x"};
  for (const std::string& m : probes) {
    bool expected = false;
    for (const std::string& ref : world.pyrophoric_refs) {
      if (tanimoto(fingerprint(m), fingerprint(ref)) == 1.0) expected = true;
    }
    CHECK(annotate(world, m).predicted_pyrophoric == expected);
  }
}

TEST_CASE("expand_retro merges explicit reactions and template instantiations") {
  World world = tiny_world();

  // the template instantiation duplicates the explicit entry; the higher
  // plausibility wins and only one reaction remains
  auto ester = expand_retro(world, "ac-ester");
  REQUIRE(ester.size() == 1);
  CHECK(ester[0].canonical == "ac-acid.me-oh>>ac-ester");
  CHECK(ester[0].plausibility == 0.9);

  auto ph = expand_retro(world, "ph-ester");
  REQUIRE(ph.size() == 2);
  CHECK(ph[0].canonical == "me-oh.ph-acid>>ph-ester");  // template, 0.8
  CHECK(ph[1].canonical == "me-oh.ph-cl>>ph-ester");    // explicit, 0.7

  CHECK(expand_retro(world, "no-such").empty());
}

TEST_CASE("expand_retro output is deduplicated, sorted, product-consistent, capped") {
  World world = mid_world();
  for (const std::string& m : {"tgt-1", "int-a", "int-b", "int-c", "deep-1"}) {
    for (int b : {1, 2, 10}) {
      auto out = expand_retro(world, m, b);
      CHECK(out.size() <= std::size_t(b));
      std::set<std::string> keys;
      for (const auto& sr : out) {
        CHECK(sr.reaction.product == m);
        CHECK(keys.insert(sr.canonical).second);
      }
      for (std::size_t i = 1; i < out.size(); ++i) {
        bool ordered = out[i - 1].plausibility > out[i].plausibility ||
                       (out[i - 1].plausibility == out[i].plausibility &&
                        out[i - 1].canonical < out[i].canonical);
        CHECK(ordered);
      }
    }
  }
}

TEST_CASE("load_world validates schema and invariants") {
  World world = tiny_world();
  CHECK(world.molecules.size() == 6);
  std::size_t n_reactions = 0;
  for (const auto& [product, entries] : world.explicit_reactions) {
    (void)product;
    n_reactions += entries.size();
  }
  CHECK(n_reactions == 2);
  CHECK(world.templates.size() == 1);

  check_error(Errc::parse_error, [] { world_from_json_text(""); });
  check_error(Errc::parse_error, [] { world_from_json_text("{ nope"); });

  // building block with a non-numeric price
  check_error(Errc::schema_violation, [] {
    world_from_json_text(R"({"building_blocks": {"a": "free"}})");
  });
  // reaction that contains its own product
  check_error(Errc::schema_violation, [] {
    world_from_json_text(
        R"({"reactions": [{"product": "a", "reactants": ["a"], "plausibility": 0.5}]})");
  });
  // carc_score outside [0,1]
  check_error(Errc::schema_violation, [] {
    world_from_json_text(R"({"molecules": {"a": {"carc_score": 1.5}}})");
  });
  // template reactant variable missing from the product pattern
  check_error(Errc::schema_violation, [] {
    world_from_json_text(
        R"({"templates": [{"id": "t", "product": "a-b", "reactants": ["$X-c"],
            "plausibility": 0.5}]})");
  });
  // non-canonical molecule key
  check_error(Errc::schema_violation, [] {
    world_from_json_text(R"({"molecules": {"Bad_Key": {}}})");
  });
}

TEST_CASE("template instantiation reproduces the bound molecule") {
  World world = tiny_world();
  auto out = expand_retro(world, "ph-ester");
  bool found = false;
  for (const auto& sr : out) {
    if (sr.canonical == "me-oh.ph-acid>>ph-ester") {
      found = true;
      CHECK(sr.reaction.reactants ==
            std::vector<std::string>{"ph-acid", "me-oh"});
    }
  }
  CHECK(found);

  // multi-token binding: "a-b-ester" binds X = "a-b"
  World w2 = world_from_json_text(R"({
    "building_blocks": {"me-oh": 1.0},
    "templates": [{"id": "t", "product": "$X-ester",
                   "reactants": ["$X-acid", "me-oh"], "plausibility": 0.5}]
  })");
  auto deep = expand_retro(w2, "a-b-ester");
  REQUIRE(deep.size() == 1);
  CHECK(deep[0].canonical == "a-b-acid.me-oh>>a-b-ester");
}
