#include "grapher/gdd.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace grapher {

std::string_view to_string(DistanceKind k) {
  switch (k) {
    case DistanceKind::normalized_edit: return "normalized-edit";
    case DistanceKind::exact: return "exact";
    case DistanceKind::numeric_abs: return "numeric-abs";
    case DistanceKind::jaccard_token: return "jaccard-token";
  }
  return "?";
}

DistanceKind distance_kind_from_string(std::string_view s) {
  if (s == "normalized-edit") return DistanceKind::normalized_edit;
  if (s == "exact") return DistanceKind::exact;
  if (s == "numeric-abs") return DistanceKind::numeric_abs;
  if (s == "jaccard-token") return DistanceKind::jaccard_token;
  throw ConfigError("unknown distance function '" + std::string(s) + "'");
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0u : 1u)});
      diag = up;
    }
  }
  return row[b.size()];
}

double normalized_edit(std::string_view a, std::string_view b) {
  std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

namespace {

std::set<std::string> word_tokens(std::string_view s) {
  std::set<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.insert(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.insert(std::move(cur));
  return out;
}

}  // namespace

double jaccard_token_distance(std::string_view a, std::string_view b) {
  auto ta = word_tokens(a), tb = word_tokens(b);
  if (ta.empty() && tb.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : ta) common += tb.count(t);
  std::size_t unite = ta.size() + tb.size() - common;
  return 1.0 - static_cast<double>(common) / static_cast<double>(unite);
}

double distance(DistanceKind kind, std::string_view a, std::string_view b) {
  if (a == kWildcard || b == kWildcard) return 0.0;
  switch (kind) {
    case DistanceKind::normalized_edit: return normalized_edit(a, b);
    case DistanceKind::exact: return a == b ? 0.0 : 1.0;
    case DistanceKind::jaccard_token: return jaccard_token_distance(a, b);
    case DistanceKind::numeric_abs: {
      AttrValue va{std::string(a)}, vb{std::string(b)};
      if (!va.number || !vb.number)
        throw DataError("numeric-abs distance on non-numeric values '" + std::string(a) + "', '" +
                        std::string(b) + "'");
      return std::fabs(*va.number - *vb.number);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ConstraintForm f) {
  switch (f) {
    case ConstraintForm::cc: return "CC";
    case ConstraintForm::vc: return "VC";
    case ConstraintForm::eid_cc: return "eid-CC";
    case ConstraintForm::eid_vc: return "eid-VC";
    case ConstraintForm::rel_cc: return "rel-CC";
    case ConstraintForm::rel_vc: return "rel-VC";
  }
  return "?";
}

ConstraintForm constraint_form_from_string(std::string_view s) {
  for (auto f : {ConstraintForm::cc, ConstraintForm::vc, ConstraintForm::eid_cc, ConstraintForm::eid_vc,
                 ConstraintForm::rel_cc, ConstraintForm::rel_vc})
    if (to_string(f) == s) return f;
  throw ConfigError("unknown constraint form '" + std::string(s) + "'");
}

DistanceConstraint DistanceConstraint::same_attr(std::string x, std::string x2, std::string attr,
                                                 DistanceKind fn, double t) {
  DistanceConstraint c;
  c.form = ConstraintForm::vc;
  c.var = std::move(x);
  c.var2 = std::move(x2);
  c.attr = attr;
  c.attr2 = std::move(attr);
  c.fn = fn;
  c.threshold = t;
  return c;
}

DistanceConstraint DistanceConstraint::eid_equal(std::string x, std::string x2) {
  DistanceConstraint c;
  c.form = ConstraintForm::eid_vc;
  c.var = std::move(x);
  c.var2 = std::move(x2);
  return c;
}

std::string PseudoRowAccessor::value(std::string_view var, std::string_view attr) const {
  auto col = pr_.column(var, attr);
  if (!col) throw DataError("pseudo-relation has no column " + std::string(var) + "." + std::string(attr));
  return pr_.rows[row_][*col];
}

std::optional<std::string> PseudoRowAccessor::eid(std::string_view var) const {
  auto col = pr_.column(var, kEidColumn);
  if (!col) throw DataError("pseudo-relation has no eid column for " + std::string(var));
  const auto& cell = pr_.rows[row_][*col];
  if (cell == kWildcard) return std::nullopt;
  return cell;
}

std::vector<std::string> PseudoRowAccessor::relation(std::string_view var, std::string_view rel) const {
  auto col = pr_.column(var, std::string(kRelPrefix) + std::string(rel));
  if (!col) throw DataError("pseudo-relation has no relation column " + std::string(var) + "." + std::string(rel));
  const auto& cell = pr_.rows[row_][*col];
  if (cell.empty()) return {};
  return split(cell, '|');
}

const Node& MatchAccessor::node(std::string_view var) const {
  return g_.node(h_[p_.require_var(var)]);
}

std::string MatchAccessor::value(std::string_view var, std::string_view attr) const {
  const Node& n = node(var);
  if (const AttrValue* v = n.attr(attr)) return v->text;
  if (strict_) throw DataError("node '" + n.id + "' has no attribute '" + std::string(attr) + "'");
  return std::string(kWildcard);
}

std::optional<std::string> MatchAccessor::eid(std::string_view var) const { return node(var).eid; }

std::vector<std::string> MatchAccessor::relation(std::string_view var, std::string_view rel) const {
  NodeIndex v = h_[p_.require_var(var)];
  std::vector<std::string> out;
  for (const auto& inc : g_.incident(v))
    if (inc.outgoing && g_.edge(inc.edge).label == rel) out.push_back(g_.node(inc.neighbor).id);
  return out;
}

double measure(const DistanceConstraint& c, const RowAccessor& row) {
  switch (c.form) {
    case ConstraintForm::cc:
      return distance(c.fn, row.value(c.var, c.attr), c.constant);
    case ConstraintForm::vc:
      return distance(c.fn, row.value(c.var, c.attr), row.value(c.var2, c.attr2.empty() ? c.attr : c.attr2));
    case ConstraintForm::eid_cc: {
      auto e = row.eid(c.var);
      return e && *e == c.constant ? 0.0 : 1.0;
    }
    case ConstraintForm::eid_vc: {
      auto a = row.eid(c.var), b = row.eid(c.var2);
      return a && b && *a == *b ? 0.0 : 1.0;
    }
    case ConstraintForm::rel_cc: {
      auto t = row.relation(c.var, c.attr);
      return std::find(t.begin(), t.end(), c.constant) != t.end() ? 0.0 : 1.0;
    }
    case ConstraintForm::rel_vc: {
      auto a = row.relation(c.var, c.attr), b = row.relation(c.var2, c.attr);
      for (const auto& x : a)
        if (std::find(b.begin(), b.end(), x) != b.end()) return 0.0;
      return 1.0;
    }
  }
  return 1.0;
}

bool eval_constraint(const DistanceConstraint& c, const RowAccessor& row) {
  switch (c.form) {
    case ConstraintForm::cc:
    case ConstraintForm::vc:
      return measure(c, row) <= c.threshold;
    default:
      return measure(c, row) == 0.0;
  }
}

Gdd::Gdd(GraphPattern s, std::vector<DistanceConstraint> l, std::pair<std::string, std::string> ev,
         std::size_t sup)
    : scope(std::move(s)), lhs(std::move(l)), support(sup), eid_vars(std::move(ev)) {
  scope.require_var(eid_vars.first);
  scope.require_var(eid_vars.second);
  for (const auto& c : lhs) {
    scope.require_var(c.var);
    if (c.form == ConstraintForm::vc || c.form == ConstraintForm::eid_vc || c.form == ConstraintForm::rel_vc)
      scope.require_var(c.var2);
  }
  rhs.push_back(DistanceConstraint::eid_equal(eid_vars.first, eid_vars.second));
}

bool satisfies_lhs(const Gdd& g, const RowAccessor& row) {
  for (const auto& c : g.lhs)
    if (!eval_constraint(c, row)) return false;
  return true;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json constraint_to_json(const DistanceConstraint& c) {
  nlohmann::json j;
  j["form"] = to_string(c.form);
  bool two_vars = c.form == ConstraintForm::vc || c.form == ConstraintForm::eid_vc ||
                  c.form == ConstraintForm::rel_vc;
  if (two_vars) j["vars"] = {c.var, c.var2};
  else j["var"] = c.var;
  if (c.form != ConstraintForm::eid_cc && c.form != ConstraintForm::eid_vc) j["attr"] = c.attr;
  if (c.form == ConstraintForm::vc && !c.attr2.empty() && c.attr2 != c.attr) j["attr2"] = c.attr2;
  if (!two_vars) j["const"] = c.constant;
  if (c.form == ConstraintForm::cc || c.form == ConstraintForm::vc) {
    j["fn"] = to_string(c.fn);
    j["t"] = c.threshold;
  }
  return j;
}

DistanceConstraint constraint_from_json(const nlohmann::json& j) {
  DistanceConstraint c;
  c.form = constraint_form_from_string(j.at("form").get<std::string>());
  if (j.contains("vars")) {
    const auto& v = j.at("vars");
    if (!v.is_array() || v.size() != 2) throw ConfigError("constraint 'vars' must list two variables");
    c.var = v[0].get<std::string>();
    c.var2 = v[1].get<std::string>();
  } else {
    c.var = j.at("var").get<std::string>();
  }
  bool two_vars = c.form == ConstraintForm::vc || c.form == ConstraintForm::eid_vc ||
                  c.form == ConstraintForm::rel_vc;
  if (two_vars && c.var2.empty()) throw ConfigError("VC constraint needs 'vars'");
  if (j.contains("attr")) c.attr = j.at("attr").get<std::string>();
  c.attr2 = j.contains("attr2") ? j.at("attr2").get<std::string>() : c.attr;
  if (j.contains("const")) c.constant = j.at("const").get<std::string>();
  if (j.contains("fn")) c.fn = distance_kind_from_string(j.at("fn").get<std::string>());
  if (j.contains("t")) c.threshold = j.at("t").get<double>();
  if (c.form == ConstraintForm::eid_cc || c.form == ConstraintForm::eid_vc || c.form == ConstraintForm::rel_cc ||
      c.form == ConstraintForm::rel_vc) {
    if (c.threshold != 0) throw ConfigError("eid and relation constraints carry threshold 0");
  }
  if ((c.form == ConstraintForm::cc || c.form == ConstraintForm::vc || c.form == ConstraintForm::rel_cc ||
       c.form == ConstraintForm::rel_vc) &&
      c.attr.empty())
    throw ConfigError(std::string(to_string(c.form)) + " constraint needs 'attr'");
  if (c.threshold < 0) throw ConfigError("negative threshold");
  return c;
}

std::string fmt_threshold(double t) { return t == 0 ? "= 0" : "≤ " + format_double(t); }

std::string describe_constraint(const DistanceConstraint& c) {
  switch (c.form) {
    case ConstraintForm::vc:
      if (c.attr2.empty() || c.attr2 == c.attr)
        return "δ_" + c.attr + "(" + c.var + ", " + c.var2 + ") " + fmt_threshold(c.threshold);
      return "δ_" + c.attr + c.attr2 + "(" + c.var + "." + c.attr + ", " + c.var2 + "." + c.attr2 + ") " +
             fmt_threshold(c.threshold);
    case ConstraintForm::cc:
      return "δ_" + c.attr + "(" + c.var + "." + c.attr + ", \"" + c.constant + "\") " + fmt_threshold(c.threshold);
    case ConstraintForm::eid_cc: return "δ_eid(" + c.var + ".eid, \"" + c.constant + "\") = 0";
    case ConstraintForm::eid_vc: return "δ_eid(" + c.var + ", " + c.var2 + ") = 0";
    case ConstraintForm::rel_cc: return "δ_≡(" + c.var + "." + c.attr + ", " + c.constant + ") = 0";
    case ConstraintForm::rel_vc:
      return "δ_≡(" + c.var + "." + c.attr + ", " + c.var2 + "." + c.attr + ") = 0";
  }
  return "?";
}

}  // namespace

nlohmann::json rule_to_json(const Gdd& g) {
  nlohmann::json lhs = nlohmann::json::array();
  for (const auto& c : g.lhs) lhs.push_back(constraint_to_json(c));
  return {{"scope", pattern_to_json(g.scope)},
          {"lhs", lhs},
          {"rhs", {{"eid_vars", {g.eid_vars.first, g.eid_vars.second}}}},
          {"support", g.support}};
}

Gdd rule_from_json(const nlohmann::json& j) {
  try {
    GraphPattern scope = pattern_from_json(j.at("scope"));
    std::vector<DistanceConstraint> lhs;
    for (const auto& c : j.at("lhs")) lhs.push_back(constraint_from_json(c));
    const auto& ev = j.at("rhs").at("eid_vars");
    if (!ev.is_array() || ev.size() != 2) throw ConfigError("rhs.eid_vars must name two variables");
    std::size_t support = j.contains("support") ? j.at("support").get<std::size_t>() : 0;
    return Gdd(std::move(scope), std::move(lhs), {ev[0].get<std::string>(), ev[1].get<std::string>()}, support);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed rule: ") + e.what());
  }
}

std::vector<Gdd> read_rules(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed rule file: ") + e.what());
  }
  if (!j.is_array()) throw ConfigError("rule file must hold a JSON array");
  std::vector<Gdd> out;
  for (const auto& r : j) out.push_back(rule_from_json(r));
  return out;
}

std::vector<Gdd> load_rules_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open rule file " + path);
  return read_rules(in);
}

void write_rules(std::ostream& out, std::span<const Gdd> rules) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rules) arr.push_back(rule_to_json(r));
  out << arr.dump(2) << '\n';
}

std::string describe(const Gdd& g) {
  std::string s = "(Q[";
  for (std::size_t i = 0; i < g.scope.size(); ++i) s += (i ? ", " : "") + g.scope.vars()[i].name;
  s += "], ";
  if (g.lhs.empty()) s += "∅";
  for (std::size_t i = 0; i < g.lhs.size(); ++i) s += (i ? " ∧ " : "") + describe_constraint(g.lhs[i]);
  s += " → " + describe_constraint(g.rhs.front()) + ")";
  return s;
}

// ---------------------------------------------------------------------------

std::vector<DiscoverySlot> discovery_slots(const DiscoveryConfig& config) {
  const auto& [x, x2] = config.eid_vars;
  std::vector<DiscoverySlot> slots;
  for (const auto& spec : config.attributes) {
    std::vector<double> grid = spec.grid;
    if (grid.empty()) {
      switch (spec.fn) {
        case DistanceKind::exact: grid = {0}; break;
        case DistanceKind::numeric_abs:
          throw ConfigError("numeric-abs on '" + spec.attr + "' needs an explicit threshold grid");
        default: grid = DiscoveryConfig::default_grid();
      }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.front() < 0) throw ConfigError("negative threshold in grid for '" + spec.attr + "'");
    slots.push_back({DistanceConstraint::same_attr(x, x2, spec.attr, spec.fn, 0), grid});
    for (const auto& c : spec.constants)
      for (const auto& v : {x, x2}) {
        DistanceConstraint cc;
        cc.form = ConstraintForm::cc;
        cc.var = v;
        cc.attr = spec.attr;
        cc.constant = c;
        cc.fn = spec.fn;
        slots.push_back({cc, grid});
      }
  }
  for (const auto& r : config.relations) {
    DistanceConstraint rc;
    rc.form = ConstraintForm::rel_vc;
    rc.var = x;
    rc.var2 = x2;
    rc.attr = r;
    slots.push_back({rc, {0}});
  }
  return slots;
}

namespace {

// thresholds[s] = grid index or -1 when slot s is not in Φ_X
using Candidate = std::vector<int>;

bool general_or_equal(const Candidate& r, const Candidate& c) {
  for (std::size_t s = 0; s < r.size(); ++s) {
    if (r[s] < 0) continue;
    if (c[s] < 0 || r[s] < c[s]) return false;
  }
  return true;
}

}  // namespace

std::vector<Gdd> discover_gdds(const PseudoRelation& pr, const GraphPattern& scope,
                               const DiscoveryConfig& config, std::size_t min_support) {
  const auto& [x, x2] = config.eid_vars;
  auto ex = pr.column(x, kEidColumn), ex2 = pr.column(x2, kEidColumn);
  if (!ex || !ex2) throw ConfigError("pseudo-relation lacks eid columns for (" + x + ", " + x2 + ")");

  auto slots = discovery_slots(config);
  const std::size_t n = slots.size();

  // eid-complete rows only
  std::vector<std::size_t> rows;
  std::vector<bool> positive;
  for (std::size_t r = 0; r < pr.rows.size(); ++r) {
    const auto& a = pr.rows[r][*ex];
    const auto& b = pr.rows[r][*ex2];
    if (a == kWildcard || b == kWildcard) continue;
    rows.push_back(r);
    positive.push_back(a == b);
  }
  // dist[s][i]: measured distance of slot s on complete row i
  std::vector<std::vector<double>> dist(n, std::vector<double>(rows.size()));
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < rows.size(); ++i)
      dist[s][i] = measure(slots[s].shape, PseudoRowAccessor(pr, rows[i]));

  std::vector<Candidate> valid;
  std::vector<std::pair<Candidate, std::size_t>> emitted;
  const std::size_t max_level = config.max_lhs == 0 ? n : std::min(config.max_lhs, n);

  std::vector<std::size_t> members;
  auto evaluate = [&](const Candidate& cand) {
    for (const auto& v : valid)
      if (general_or_equal(v, cand)) return;
    std::size_t support = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      bool holds = true;
      for (auto s : members)
        if (dist[s][i] > slots[s].grid[static_cast<std::size_t>(cand[s])]) {
          holds = false;
          break;
        }
      if (!holds) continue;
      if (!positive[i]) return;  // counterexample
      ++support;
    }
    valid.push_back(cand);
    if (support >= min_support) emitted.emplace_back(cand, support);
  };

  for (std::size_t level = 0; level <= max_level; ++level) {
    // combinations of `level` slots in index order
    std::vector<std::size_t> comb(level);
    for (std::size_t i = 0; i < level; ++i) comb[i] = i;
    while (true) {
      members = comb;
      // thresholds: lexicographic, each slot loosest first
      Candidate cand(n, -1);
      for (auto s : members) cand[s] = static_cast<int>(slots[s].grid.size()) - 1;
      while (true) {
        evaluate(cand);
        std::size_t k = members.size();
        while (k > 0) {
          auto s = members[k - 1];
          if (cand[s] > 0) {
            --cand[s];
            break;
          }
          cand[s] = static_cast<int>(slots[s].grid.size()) - 1;
          --k;
        }
        if (k == 0) break;
      }
      // next combination
      std::size_t i = level;
      while (i > 0 && comb[i - 1] == n - level + i - 1) --i;
      if (i == 0) break;
      ++comb[i - 1];
      for (std::size_t j = i; j < level; ++j) comb[j] = comb[j - 1] + 1;
    }
  }

  std::vector<Gdd> out;
  for (const auto& [cand, support] : emitted) {
    std::vector<DistanceConstraint> lhs;
    for (std::size_t s = 0; s < n; ++s) {
      if (cand[s] < 0) continue;
      DistanceConstraint c = slots[s].shape;
      c.threshold = slots[s].grid[static_cast<std::size_t>(cand[s])];
      lhs.push_back(std::move(c));
    }
    out.emplace_back(scope, std::move(lhs), config.eid_vars, support);
  }
  return out;
}

std::vector<Gdd> rank_rules(std::vector<Gdd> rules) {
  std::vector<std::pair<std::string, std::size_t>> keys;
  for (std::size_t i = 0; i < rules.size(); ++i) keys.emplace_back(rule_to_json(rules[i]).dump(), i);
  std::vector<std::size_t> order(rules.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rules[a].support != rules[b].support) return rules[a].support > rules[b].support;
    if (rules[a].lhs.size() != rules[b].lhs.size()) return rules[a].lhs.size() < rules[b].lhs.size();
    return keys[a].first < keys[b].first;
  });
  std::vector<Gdd> out;
  out.reserve(rules.size());
  for (auto i : order) out.push_back(std::move(rules[i]));
  return out;
}

}  // namespace grapher
