// Brute-force reference implementations and seeded fixtures shared by the unit and
// acceptance tests. Nothing here calls into the code it is used to check, apart from the
// plain data types.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "grapher/gdd.hpp"
#include "grapher/graph.hpp"
#include "grapher/pattern.hpp"

namespace oracle {

using grapher::GraphPattern;
using grapher::Node;
using grapher::NodeIndex;
using grapher::PropertyGraph;

inline std::string data_path(const std::string& rel) { return std::string(GRAPHER_TEST_DATA) + "/" + rel; }

// Full-matrix Levenshtein.
inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

inline double string_distance(grapher::DistanceKind fn, const std::string& a, const std::string& b) {
  if (a == "*" || b == "*") return 0;
  if (fn == grapher::DistanceKind::exact) return a == b ? 0 : 1;
  const std::size_t m = std::max(a.size(), b.size());
  return m == 0 ? 0.0 : static_cast<double>(edit_distance(a, b)) / static_cast<double>(m);
}

inline std::string value_of(const Node& n, const std::string& attr) {
  for (const auto& a : n.attrs)
    if (a.name == attr) return a.value.text;
  return "*";
}

inline bool natural_lt(const std::string& a, const std::string& b) {
  // "v" + number ids in the fixtures: compare by length first, then text
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

// Every var -> node assignment that preserves labels and pattern edges.
inline std::vector<std::vector<NodeIndex>> all_homomorphisms(const PropertyGraph& g, const GraphPattern& p,
                                                             const std::vector<std::optional<NodeIndex>>& pins = {}) {
  const std::size_t k = p.size(), n = g.node_count();
  std::vector<std::vector<NodeIndex>> out;
  if (n == 0) return out;
  std::vector<NodeIndex> h(k, 0);
  auto label_ok = [](const std::string& a, const std::string& b) { return a == b || a == "*" || b == "*"; };
  while (true) {
    bool ok = true;
    for (std::size_t i = 0; i < k && ok; ++i) {
      if (!pins.empty() && pins[i] && *pins[i] != h[i]) ok = false;
      else if (!label_ok(p.vars()[i].label, g.node(h[i]).label)) ok = false;
    }
    for (const auto& e : p.edges()) {
      if (!ok) break;
      bool found = false;
      for (const auto& ge : g.edges())
        if (ge.src == g.node(h[e.src]).id && ge.dst == g.node(h[e.dst]).id && label_ok(ge.label, e.label)) found = true;
      ok = found;
    }
    if (ok) out.push_back(h);
    std::size_t i = 0;
    while (i < k && ++h[i] == n) h[i++] = 0;
    if (i == k) break;
  }
  return out;
}

// Label- and edge-preserving permutations of the pattern vars, identity included.
inline std::vector<std::vector<std::size_t>> all_automorphisms(const GraphPattern& p) {
  std::vector<std::size_t> perm(p.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::multiset<std::tuple<std::size_t, std::string, std::size_t>> edges;
  for (const auto& e : p.edges()) edges.insert({e.src, e.label, e.dst});
  std::vector<std::vector<std::size_t>> out;
  do {
    bool ok = true;
    for (std::size_t i = 0; i < p.size() && ok; ++i) ok = p.vars()[i].label == p.vars()[perm[i]].label;
    if (!ok) continue;
    std::multiset<std::tuple<std::size_t, std::string, std::size_t>> mapped;
    for (const auto& e : p.edges()) mapped.insert({perm[e.src], e.label, perm[e.dst]});
    if (mapped == edges) out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

// Homomorphisms that are strictly smaller (id-wise, var by var) than all their non-identity
// symmetric images, as id rows, sorted.
inline std::vector<std::vector<std::string>> canonical_matches(const PropertyGraph& g, const GraphPattern& p) {
  auto autos = all_automorphisms(p);
  std::vector<std::vector<std::string>> out;
  for (const auto& h : all_homomorphisms(g, p)) {
    std::vector<std::string> ids;
    for (auto v : h) ids.push_back(g.node(v).id);
    bool keep = true;
    for (const auto& perm : autos) {
      bool identity = true;
      for (std::size_t i = 0; i < perm.size(); ++i) identity = identity && perm[i] == i;
      if (identity) continue;
      std::vector<std::string> img(ids.size());
      for (std::size_t i = 0; i < perm.size(); ++i) img[perm[i]] = ids[i];
      if (!std::lexicographical_compare(ids.begin(), ids.end(), img.begin(), img.end(), natural_lt)) keep = false;
    }
    if (keep) out.push_back(ids);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), natural_lt);
  });
  return out;
}

// CC/VC (attribute forms) and eid-VC only.
inline bool constraint_holds(const grapher::DistanceConstraint& c, const PropertyGraph& g, const GraphPattern& p,
                             const std::vector<NodeIndex>& h) {
  auto node = [&](const std::string& var) -> const Node& { return g.node(h[p.require_var(var)]); };
  using F = grapher::ConstraintForm;
  switch (c.form) {
    case F::cc: return string_distance(c.fn, value_of(node(c.var), c.attr), c.constant) <= c.threshold;
    case F::vc: {
      const std::string& a2 = c.attr2.empty() ? c.attr : c.attr2;
      return string_distance(c.fn, value_of(node(c.var), c.attr), value_of(node(c.var2), a2)) <= c.threshold;
    }
    case F::eid_vc: return node(c.var).eid && node(c.var2).eid && *node(c.var).eid == *node(c.var2).eid;
    default: throw std::logic_error("oracle does not evaluate this constraint form");
  }
}

// Is there a rule and a homomorphism of its scope, with the eid vars on the pair in either
// orientation, satisfying the whole LHS?
inline bool brute_force_link(const std::string& a, const std::string& b, const std::vector<grapher::Gdd>& rules,
                             const PropertyGraph& g) {
  const NodeIndex ia = g.index_of(a), ib = g.index_of(b);
  for (const auto& r : rules) {
    for (auto [u, v] : {std::pair{ia, ib}, std::pair{ib, ia}}) {
      std::vector<std::optional<NodeIndex>> pins(r.scope.size());
      pins[r.scope.require_var(r.eid_vars.first)] = u;
      pins[r.scope.require_var(r.eid_vars.second)] = v;
      for (const auto& h : all_homomorphisms(g, r.scope, pins)) {
        bool all = true;
        for (const auto& c : r.lhs) all = all && constraint_holds(c, g, r.scope, h);
        if (all) return true;
      }
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Discovery oracle: every (slot subset × threshold) candidate is scored independently, and
// the minimal valid ones with enough support are kept.

struct OracleSlot {
  std::string attr;
  std::vector<double> grid;  // ascending
};

// (attribute, threshold) list, sorted by attribute.
using RuleKey = std::vector<std::pair<std::string, double>>;

inline std::set<RuleKey> discover_oracle(const grapher::PseudoRelation& pr, const std::string& x,
                                         const std::string& x2, const std::vector<OracleSlot>& slots,
                                         std::size_t min_support, std::size_t max_lhs) {
  auto col = [&](const std::string& var, const std::string& attr) {
    for (std::size_t i = 0; i < pr.columns.size(); ++i)
      if (pr.columns[i].var == var && pr.columns[i].attr == attr) return i;
    throw std::logic_error("missing column");
  };
  const auto ex = col(x, "eid"), ex2 = col(x2, "eid");
  struct Cand {
    std::vector<int> t;  // -1 absent
    bool valid;
    std::size_t support;
  };
  std::vector<Cand> cands;
  std::vector<int> t(slots.size(), -1);
  while (true) {
    std::size_t size = 0;
    for (int v : t) size += v >= 0;
    if (max_lhs == 0 || size <= max_lhs) {
      bool valid = true;
      std::size_t support = 0;
      for (const auto& row : pr.rows) {
        if (row[ex] == "*" || row[ex2] == "*") continue;
        bool sat = true;
        for (std::size_t s = 0; s < slots.size(); ++s) {
          if (t[s] < 0) continue;
          double d = string_distance(grapher::DistanceKind::normalized_edit, row[col(x, slots[s].attr)],
                                     row[col(x2, slots[s].attr)]);
          if (d > slots[s].grid[static_cast<std::size_t>(t[s])]) sat = false;
        }
        if (!sat) continue;
        if (row[ex] != row[ex2]) valid = false;
        else ++support;
      }
      cands.push_back({t, valid, support});
    }
    std::size_t i = 0;
    while (i < slots.size()) {
      if (++t[i] < static_cast<int>(slots[i].grid.size())) break;
      t[i] = -1;
      ++i;
    }
    if (i == slots.size()) break;
  }
  auto more_general = [](const std::vector<int>& r, const std::vector<int>& c) {
    if (r == c) return false;
    for (std::size_t s = 0; s < r.size(); ++s) {
      if (r[s] < 0) continue;
      if (c[s] < 0 || r[s] < c[s]) return false;
    }
    return true;
  };
  std::set<RuleKey> out;
  for (const auto& c : cands) {
    if (!c.valid || c.support < min_support) continue;
    bool minimal = true;
    for (const auto& o : cands)
      if (o.valid && more_general(o.t, c.t)) minimal = false;
    if (!minimal) continue;
    RuleKey key;
    for (std::size_t s = 0; s < slots.size(); ++s)
      if (c.t[s] >= 0) key.emplace_back(slots[s].attr, slots[s].grid[static_cast<std::size_t>(c.t[s])]);
    std::sort(key.begin(), key.end());
    out.insert(key);
  }
  return out;
}

inline RuleKey rule_key(const grapher::Gdd& r) {
  RuleKey key;
  for (const auto& c : r.lhs) key.emplace_back(c.attr, c.threshold);
  std::sort(key.begin(), key.end());
  return key;
}

// ---------------------------------------------------------------------------
// Seeded fixtures

inline std::string random_word(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len,
                               const std::string& alphabet = "abcd") {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len), ch(0, alphabet.size() - 1);
  std::string s;
  for (std::size_t i = len(rng); i > 0; --i) s += alphabet[ch(rng)];
  return s;
}

// Up to `max_nodes` nodes over labels A, B, C with "name"/"code" attributes (sometimes
// missing), random r/s edges, ids v0, v1, ...
inline PropertyGraph random_graph(std::uint64_t seed, std::size_t max_nodes = 50, std::size_t labels = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> nn(max_nodes / 2, max_nodes), lab(0, labels - 1);
  const std::size_t n = nn(rng);
  PropertyGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    Node node{"v" + std::to_string(i), std::string(1, static_cast<char>('A' + lab(rng))), std::nullopt, {}};
    if (rng() % 5) node.attrs.push_back({"name", grapher::AttrValue(random_word(rng, 2, 5))});
    if (rng() % 4) node.attrs.push_back({"code", grapher::AttrValue(random_word(rng, 1, 3, "xyz"))});
    if (rng() % 2) node.eid = "e" + std::to_string(rng() % (n / 2 + 1));
    g.add_node(std::move(node));
  }
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t m = n + n / 2;
  for (std::size_t i = 0; i < m; ++i)
    g.add_edge({"v" + std::to_string(pick(rng)), rng() % 3 ? "r" : "s", "v" + std::to_string(pick(rng))});
  return g;
}

// Rules over a pair of same-label vars, either sharing a neighbour or directly linked.
inline std::vector<grapher::Gdd> random_rules(std::uint64_t seed, std::size_t count = 3) {
  using grapher::DistanceConstraint;
  using grapher::DistanceKind;
  std::mt19937_64 rng(seed);
  std::vector<grapher::Gdd> out;
  const std::string labels = "ABC";
  const double thresholds[] = {0, 0.2, 0.4, 0.6};
  for (std::size_t i = 0; i < count; ++i) {
    std::string l(1, labels[rng() % 3]);
    std::string el = rng() % 3 ? "r" : "s";
    std::vector<grapher::PatternVar> vars{{"x", l}, {"x'", l}};
    std::vector<grapher::PatternEdge> edges;
    switch (rng() % 3) {
      case 0:
        vars.push_back({"y", rng() % 2 ? "*" : std::string(1, labels[rng() % 3])});
        edges = {{0, el, 2}, {1, el, 2}};
        break;
      case 1:
        vars.push_back({"y", std::string(1, labels[rng() % 3])});
        edges = {{2, el, 0}, {1, el, 2}};
        break;
      default: edges = {{0, el, 1}};
    }
    std::vector<DistanceConstraint> lhs;
    const std::size_t k = 1 + rng() % 2;
    for (std::size_t j = 0; j < k; ++j) {
      const std::string attr = rng() % 2 ? "name" : "code";
      if (rng() % 4 == 0) {
        DistanceConstraint cc;
        cc.form = grapher::ConstraintForm::cc;
        cc.var = rng() % 2 ? "x" : "x'";
        cc.attr = attr;
        cc.constant = random_word(rng, 1, 3, attr == "name" ? "abcd" : "xyz");
        cc.fn = DistanceKind::normalized_edit;
        cc.threshold = thresholds[rng() % 4];
        lhs.push_back(cc);
      } else {
        lhs.push_back(DistanceConstraint::same_attr("x", "x'", attr,
                                                    rng() % 4 ? DistanceKind::normalized_edit : DistanceKind::exact,
                                                    thresholds[rng() % 4]));
      }
    }
    out.emplace_back(GraphPattern(vars, edges), lhs, std::pair<std::string, std::string>{"x", "x'"});
  }
  return out;
}

// Pseudo-relation over vars x, x' with attributes a0..a{k-1}: short words, an occasional
// wildcard, and eids drawn from a small pool so both classes occur.
inline grapher::PseudoRelation random_pseudo_relation(std::uint64_t seed, std::size_t rows, std::size_t attrs) {
  std::mt19937_64 rng(seed);
  grapher::PseudoRelation pr;
  for (const std::string v : {"x", "x'"}) {
    for (std::size_t a = 0; a < attrs; ++a) pr.columns.push_back({v, "a" + std::to_string(a)});
    pr.columns.push_back({v, "eid"});
  }
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<std::string> row;
    std::vector<std::string> base;
    for (std::size_t a = 0; a < attrs; ++a) base.push_back(random_word(rng, 3, 6, "abc"));
    const bool same = rng() % 2;
    const std::string e1 = "e" + std::to_string(rng() % 3);
    std::string e2 = same ? e1 : "e" + std::to_string(3 + rng() % 3);
    for (int side = 0; side < 2; ++side) {
      for (std::size_t a = 0; a < attrs; ++a) {
        std::string v = base[a];
        if (side == 1 && (!same || rng() % 2)) {
          // a few random edits
          for (std::size_t e = rng() % (same ? 2 : 4); e > 0 && !v.empty(); --e) v[rng() % v.size()] = "abcd"[rng() % 4];
        }
        if (rng() % 12 == 0) v = "*";
        row.push_back(v);
      }
      std::string eid = side == 0 ? e1 : e2;
      if (rng() % 10 == 0) eid = "*";
      row.push_back(eid);
    }
    pr.rows.push_back(std::move(row));
  }
  return pr;
}

}  // namespace oracle
