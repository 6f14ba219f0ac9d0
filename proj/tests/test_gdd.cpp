#include <doctest.h>

#include <sstream>

#include "grapher/gdd.hpp"
#include "oracles.hpp"

using namespace grapher;

namespace {

PropertyGraph fig1() {
  return load_graph_files(oracle::data_path("fig1/nodes.jsonl"), oracle::data_path("fig1/edges.jsonl"));
}

// Single-row relation over x, x' for evaluating constraints on literal values.
PseudoRelation pair_row(const std::string& attr, const std::string& a, const std::string& b) {
  PseudoRelation pr;
  pr.columns = {{"x", attr}, {"x", "eid"}, {"x'", attr}, {"x'", "eid"}};
  pr.rows = {{a, "*", b, "*"}};
  return pr;
}

PseudoRelation names_table(std::vector<std::array<std::string, 6>> rows) {
  PseudoRelation pr;
  pr.columns = {{"x", "FIRSTNAME"}, {"x", "LASTNAME"}, {"x", "eid"}, {"x'", "FIRSTNAME"}, {"x'", "LASTNAME"}, {"x'", "eid"}};
  for (const auto& r : rows) pr.rows.push_back({r.begin(), r.end()});
  return pr;
}

GraphPattern pair_scope() { return GraphPattern({{"x", "user"}, {"x'", "user"}}, {{0, "knows", 1}}); }

}  // namespace

TEST_CASE("edit distances") {
  CHECK(levenshtein("Leese", "Liese") == 1);
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(normalized_edit("Leese", "Liese") == doctest::Approx(0.2));
  CHECK(normalized_edit("", "") == 0);
  CHECK(distance(DistanceKind::normalized_edit, "Leese", "*") == 0);
  CHECK(distance(DistanceKind::exact, "a", "b") == 1);
  CHECK(distance(DistanceKind::exact, "*", "b") == 0);
  CHECK(distance(DistanceKind::numeric_abs, "3", "5.5") == doctest::Approx(2.5));
  CHECK_THROWS_AS(distance(DistanceKind::numeric_abs, "3", "x"), DataError);
  CHECK(jaccard_token_distance("Nature Documentary", "documentary nature") == 0);
  CHECK(jaccard_token_distance("a b", "b c") == doctest::Approx(1.0 - 1.0 / 3.0));
}

TEST_CASE("levenshtein agrees with the full-matrix oracle") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    auto a = oracle::random_word(rng, 0, 8), b = oracle::random_word(rng, 0, 8);
    CHECK(levenshtein(a, b) == oracle::edit_distance(a, b));
  }
}

TEST_CASE("constraint evaluation") {
  auto same = DistanceConstraint::same_attr("x", "x'", "LN", DistanceKind::normalized_edit, 0);
  auto pr = pair_row("LN", "Absolem", "Absolem");
  CHECK(eval_constraint(same, PseudoRowAccessor(pr, 0)));

  auto fn = DistanceConstraint::same_attr("x", "x'", "FN", DistanceKind::normalized_edit, 0.24);
  auto pr2 = pair_row("FN", "Leese", "*");
  CHECK(eval_constraint(fn, PseudoRowAccessor(pr2, 0)));

  auto pr3 = pair_row("FN", "Leese", "Liese");
  CHECK(eval_constraint(fn, PseudoRowAccessor(pr3, 0)));
  fn.threshold = 0.1;
  CHECK_FALSE(eval_constraint(fn, PseudoRowAccessor(pr3, 0)));

  SUBCASE("same-attribute VCs are symmetric") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 200; ++i) {
      auto a = oracle::random_word(rng, 0, 6), b = oracle::random_word(rng, 0, 6);
      auto c = DistanceConstraint::same_attr("x", "x'", "A", DistanceKind::normalized_edit, 0.3);
      auto ab = pair_row("A", a, b), ba = pair_row("A", b, a);
      CHECK(eval_constraint(c, PseudoRowAccessor(ab, 0)) == eval_constraint(c, PseudoRowAccessor(ba, 0)));
    }
  }
}

TEST_CASE("eid and relation constraints on the toy graph") {
  auto g = fig1();
  auto q3 = load_pattern_file(oracle::data_path("fig1/q3.json"));
  auto eid = DistanceConstraint::eid_equal("x", "x'");
  Assignment h34{g.index_of("v3"), g.index_of("v4"), g.index_of("v7")};
  Assignment h310{g.index_of("v3"), g.index_of("v10"), g.index_of("v7")};
  CHECK(eval_constraint(eid, MatchAccessor(g, q3, h34)));
  CHECK_FALSE(eval_constraint(eid, MatchAccessor(g, q3, h310)));

  DistanceConstraint rel;
  rel.form = ConstraintForm::rel_vc;
  rel.var = "x";
  rel.var2 = "x'";
  rel.attr = "uses";
  CHECK(eval_constraint(rel, MatchAccessor(g, q3, h34)));

  // strict access refuses a missing attribute
  auto missing = DistanceConstraint::same_attr("x", "x'", "AGE", DistanceKind::exact, 0);
  CHECK(eval_constraint(missing, MatchAccessor(g, q3, h34)));
  CHECK_THROWS_AS(eval_constraint(missing, MatchAccessor(g, q3, h34, true)), DataError);
}

TEST_CASE("the example rules hold on the toy duplicates") {
  auto g = fig1();
  auto rules = load_rules_file(oracle::data_path("fig1/rules_example4.json"));
  REQUIRE(rules.size() == 2);
  const auto& q = rules[0].scope;
  Assignment h34{g.index_of("v3"), g.index_of("v4"), g.index_of("v7")};
  Assignment h1011{g.index_of("v10"), g.index_of("v11"), g.index_of("v7")};
  Assignment h310{g.index_of("v3"), g.index_of("v10"), g.index_of("v7")};
  CHECK(satisfies_lhs(rules[0], MatchAccessor(g, q, h1011)));
  CHECK_FALSE(satisfies_lhs(rules[0], MatchAccessor(g, q, h34)));
  CHECK(satisfies_lhs(rules[1], MatchAccessor(g, q, h34)));
  CHECK_FALSE(satisfies_lhs(rules[1], MatchAccessor(g, q, h310)));

  Gdd empty(q, {}, {"x", "x'"});
  CHECK(satisfies_lhs(empty, MatchAccessor(g, q, h310)));
}

TEST_CASE("rule files round-trip and print in rule notation") {
  auto rules = load_rules_file(oracle::data_path("fig1/rules_example4.json"));
  std::stringstream out;
  write_rules(out, rules);
  auto back = read_rules(out);
  REQUIRE(back.size() == rules.size());
  for (std::size_t i = 0; i < rules.size(); ++i) CHECK(rule_to_json(back[i]) == rule_to_json(rules[i]));
  CHECK(describe(rules[1]) == "(Q[x, x', y], δ_LASTNAME(x, x') ≤ 0.25 ∧ δ_FIRSTNAME(x, x') ≤ 0.3 → δ_eid(x, x') = 0)");

  std::istringstream bad(R"([{"scope": {"vars": [{"name": "x", "label": "a"}], "edges": []},
                               "lhs": [{"form": "EID-VC", "vars": ["x", "x"], "t": 0.5}],
                               "rhs": {"eid_vars": ["x", "x"]}}])");
  CHECK_THROWS_AS(read_rules(bad), ConfigError);
}

TEST_CASE("discovery recovers the name rule") {
  // LN = 0 alone admits (Leese, Anna); FN alone admits (Tom Hardy, Tom Hardi)
  auto pr = names_table({{"Leese", "Absolem", "e3", "Liese", "Absolem", "e3"},
                         {"Marta", "Kowalski", "e10", "Marta", "Kowalski", "e10"},
                         {"Leese", "Absolem", "e3", "Anna", "Absolem", "e7"},
                         {"Tom", "Hardy", "e2", "Tom", "Hardi", "e9"}});
  DiscoveryConfig cfg;
  cfg.eid_vars = {"x", "x'"};
  cfg.attributes = {{"FIRSTNAME", DistanceKind::normalized_edit, {0, 0.24}, {}},
                    {"LASTNAME", DistanceKind::normalized_edit, {0, 0.24}, {}}};
  auto rules = discover_gdds(pr, pair_scope(), cfg, 2);
  REQUIRE(rules.size() == 1);
  CHECK(oracle::rule_key(rules[0]) == oracle::RuleKey{{"FIRSTNAME", 0.24}, {"LASTNAME", 0}});
  CHECK(rules[0].support == 2);

  std::vector<oracle::OracleSlot> slots{{"FIRSTNAME", {0, 0.24}}, {"LASTNAME", {0, 0.24}}};
  CHECK(oracle::discover_oracle(pr, "x", "x'", slots, 2, 0) == std::set<oracle::RuleKey>{oracle::rule_key(rules[0])});

  CHECK(discover_gdds(pr, pair_scope(), cfg, pr.rows.size() + 1).empty());
}

TEST_CASE("discovery finds nothing when a non-match is indistinguishable from a match") {
  auto pr = names_table({{"Ann", "Lee", "e1", "Ann", "Lee", "e1"},
                         {"Ann", "Lee", "e1", "Ann", "Lee", "e2"},
                         {"Bob", "Ray", "e3", "Bob", "Ray", "e3"}});
  DiscoveryConfig cfg;
  cfg.eid_vars = {"x", "x'"};
  cfg.attributes = {{"FIRSTNAME", DistanceKind::normalized_edit, {}, {}},
                    {"LASTNAME", DistanceKind::normalized_edit, {}, {}}};
  CHECK(discover_gdds(pr, pair_scope(), cfg, 1).empty());
}

TEST_CASE("rows with a wildcard eid are ignored by discovery") {
  auto pr = names_table({{"Ann", "Lee", "e1", "Ann", "Lee", "e1"},
                         {"Ann", "Lee", "e1", "Ann", "Lee", "*"},
                         {"Bob", "Ray", "e3", "Rob", "Ray", "e4"}});
  DiscoveryConfig cfg;
  cfg.eid_vars = {"x", "x'"};
  cfg.attributes = {{"FIRSTNAME", DistanceKind::normalized_edit, {0}, {}}};
  auto rules = discover_gdds(pr, pair_scope(), cfg, 1);
  REQUIRE(rules.size() == 1);
  CHECK(rules[0].support == 1);

  PseudoRelation no_eid;
  no_eid.columns = {{"x", "FIRSTNAME"}, {"x'", "FIRSTNAME"}};
  CHECK_THROWS_AS(discover_gdds(no_eid, pair_scope(), cfg, 1), ConfigError);
}

TEST_CASE("discovery matches the exhaustive oracle on random tables") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t attrs = 1 + seed % 3;
    auto pr = oracle::random_pseudo_relation(seed, 8, attrs);
    DiscoveryConfig cfg;
    cfg.eid_vars = {"x", "x'"};
    std::vector<oracle::OracleSlot> slots;
    for (std::size_t a = 0; a < attrs; ++a) {
      std::vector<double> grid{0, 0.2, 0.4, 0.6};
      cfg.attributes.push_back({"a" + std::to_string(a), DistanceKind::normalized_edit, grid, {}});
      slots.push_back({"a" + std::to_string(a), grid});
    }
    std::set<oracle::RuleKey> got;
    for (const auto& r : discover_gdds(pr, pair_scope(), cfg, 1)) got.insert(oracle::rule_key(r));
    INFO("seed " << seed);
    CHECK(got == oracle::discover_oracle(pr, "x", "x'", slots, 1, 0));
  }
}

TEST_CASE("emitted rules are valid and minimal") {
  auto pr = oracle::random_pseudo_relation(77, 8, 3);
  DiscoveryConfig cfg;
  cfg.eid_vars = {"x", "x'"};
  for (int a = 0; a < 3; ++a)
    cfg.attributes.push_back({"a" + std::to_string(a), DistanceKind::normalized_edit, {0, 0.2, 0.4, 0.6}, {}});
  auto rules = discover_gdds(pr, pair_scope(), cfg, 1);
  auto ex = *pr.column("x", "eid"), ex2 = *pr.column("x'", "eid");
  auto valid = [&](const std::vector<DistanceConstraint>& lhs) {
    Gdd r(pair_scope(), lhs, {"x", "x'"});
    for (std::size_t i = 0; i < pr.rows.size(); ++i) {
      if (pr.rows[i][ex] == "*" || pr.rows[i][ex2] == "*") continue;
      if (satisfies_lhs(r, PseudoRowAccessor(pr, i)) && pr.rows[i][ex] != pr.rows[i][ex2]) return false;
    }
    return true;
  };
  for (const auto& r : rules) {
    CHECK(valid(r.lhs));
    for (std::size_t i = 0; i < r.lhs.size(); ++i) {
      auto fewer = r.lhs;
      fewer.erase(fewer.begin() + static_cast<std::ptrdiff_t>(i));
      CHECK_FALSE(valid(fewer));
      if (r.lhs[i].threshold < 0.6) {
        auto looser = r.lhs;
        looser[i].threshold += 0.2;
        CHECK_FALSE(valid(looser));
      }
    }
  }
}

TEST_CASE("ranking: support, then size, then text") {
  auto scope = pair_scope();
  auto c = [](const char* a) { return DistanceConstraint::same_attr("x", "x'", a, DistanceKind::exact, 0); };
  std::vector<Gdd> rules{Gdd(scope, {c("A")}, {"x", "x'"}, 5), Gdd(scope, {c("A"), c("B"), c("C")}, {"x", "x'"}, 9),
                         Gdd(scope, {c("A"), c("B")}, {"x", "x'"}, 9)};
  auto ranked = rank_rules(rules);
  CHECK(ranked[0].lhs.size() == 2);
  CHECK(ranked[1].lhs.size() == 3);
  CHECK(ranked[2].support == 5);

  std::vector<Gdd> tie{Gdd(scope, {c("B")}, {"x", "x'"}, 1), Gdd(scope, {c("A")}, {"x", "x'"}, 1)};
  auto t = rank_rules(tie);
  CHECK(t[0].lhs[0].attr == "A");
  CHECK(rank_rules({tie[0]}).size() == 1);
}
