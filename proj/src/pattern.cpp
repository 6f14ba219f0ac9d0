#include "grapher/pattern.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <tuple>

namespace grapher {

namespace {

using Triple = std::tuple<std::string, std::string, std::string>;  // (src label, edge label, dst label)

std::string code_for(const std::vector<PatternVar>& vars, const std::vector<PatternEdge>& edges,
                     const std::vector<std::size_t>& order) {
  // order[k] = original var placed at position k
  std::vector<std::size_t> pos(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = k;
  std::string code;
  for (std::size_t k = 0; k < order.size(); ++k) code += vars[order[k]].label + ";";
  std::vector<std::string> es;
  for (const auto& e : edges)
    es.push_back(std::to_string(pos[e.src]) + ">" + e.label + ">" + std::to_string(pos[e.dst]));
  std::sort(es.begin(), es.end());
  code += "|";
  for (const auto& e : es) code += e + ";";
  return code;
}

std::multiset<std::tuple<std::size_t, std::string, std::size_t>> edge_bag(
    const std::vector<PatternEdge>& edges, const std::vector<std::size_t>& sigma) {
  std::multiset<std::tuple<std::size_t, std::string, std::size_t>> bag;
  for (const auto& e : edges) bag.emplace(sigma[e.src], e.label, sigma[e.dst]);
  return bag;
}

}  // namespace

GraphPattern::GraphPattern(std::vector<PatternVar> vars, std::vector<PatternEdge> edges)
    : vars_(std::move(vars)), edges_(std::move(edges)) {
  if (vars_.empty()) throw ConfigError("pattern needs at least one variable");
  if (vars_.size() > 8) throw ConfigError("patterns are limited to 8 variables");
  for (std::size_t i = 0; i < vars_.size(); ++i)
    for (std::size_t j = i + 1; j < vars_.size(); ++j)
      if (vars_[i].name == vars_[j].name)
        throw ConfigError("pattern variable '" + vars_[i].name + "' declared twice");
  for (const auto& e : edges_)
    if (e.src >= vars_.size() || e.dst >= vars_.size())
      throw ConfigError("pattern edge endpoint is not a declared variable");

  // connectivity
  std::vector<std::size_t> parent(vars_.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : edges_) parent[root(e.src)] = root(e.dst);
  for (std::size_t i = 1; i < vars_.size(); ++i)
    if (root(i) != root(0)) throw ConfigError("pattern is not connected");

  std::vector<std::size_t> perm(vars_.size());
  std::iota(perm.begin(), perm.end(), 0);
  auto base = edge_bag(edges_, perm);
  std::vector<std::string> sorted_labels;
  for (const auto& v : vars_) sorted_labels.push_back(v.label);
  std::sort(sorted_labels.begin(), sorted_labels.end());
  bool first_code = true;
  do {
    bool preserves_labels = true;
    for (std::size_t i = 0; i < perm.size() && preserves_labels; ++i)
      preserves_labels = vars_[perm[i]].label == vars_[i].label;
    if (preserves_labels) {
      bool identity = true;
      for (std::size_t i = 0; i < perm.size(); ++i) identity &= perm[i] == i;
      if (!identity && edge_bag(edges_, perm) == base) automorphisms_.push_back(perm);
    }
    bool sorted_order = true;
    for (std::size_t k = 0; k < perm.size() && sorted_order; ++k)
      sorted_order = vars_[perm[k]].label == sorted_labels[k];
    if (sorted_order) {
      auto c = code_for(vars_, edges_, perm);
      if (first_code || c < code_) code_ = std::move(c);
      first_code = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
}

std::optional<std::size_t> GraphPattern::var_index(std::string_view name) const {
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].name == name) return i;
  return std::nullopt;
}

std::size_t GraphPattern::require_var(std::string_view name) const {
  auto i = var_index(name);
  if (!i) throw ConfigError("pattern has no variable '" + std::string(name) + "'");
  return *i;
}

nlohmann::json pattern_to_json(const GraphPattern& p) {
  nlohmann::json vars = nlohmann::json::array(), edges = nlohmann::json::array();
  for (const auto& v : p.vars()) vars.push_back({{"name", v.name}, {"label", v.label}});
  for (const auto& e : p.edges())
    edges.push_back({{"src", p.vars()[e.src].name}, {"label", e.label}, {"dst", p.vars()[e.dst].name}});
  return {{"vars", vars}, {"edges", edges}};
}

GraphPattern pattern_from_json(const nlohmann::json& j) {
  try {
    std::vector<PatternVar> vars;
    for (const auto& v : j.at("vars"))
      vars.push_back({v.at("name").get<std::string>(), v.at("label").get<std::string>()});
    auto index = [&](const std::string& name) {
      for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].name == name) return i;
      throw ConfigError("pattern edge references undeclared variable '" + name + "'");
    };
    std::vector<PatternEdge> edges;
    if (j.contains("edges"))
      for (const auto& e : j.at("edges"))
        edges.push_back({index(e.at("src").get<std::string>()), e.at("label").get<std::string>(),
                         index(e.at("dst").get<std::string>())});
    return GraphPattern(std::move(vars), std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed pattern: ") + e.what());
  }
}

GraphPattern load_pattern_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pattern file " + path);
  try {
    return pattern_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<std::vector<std::string>> MatchList::row_ids(const PropertyGraph& g) const {
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<std::string> ids;
    for (auto v : r) ids.push_back(g.node(v).id);
    out.push_back(std::move(ids));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool has_edge(const PropertyGraph& g, NodeIndex from, NodeIndex to, std::string_view label) {
  for (const auto& inc : g.incident(from))
    if (inc.outgoing && inc.neighbor == to && labels_match(g.edge(inc.edge).label, label)) return true;
  return false;
}

class Backtracker {
 public:
  Backtracker(const PropertyGraph& g, const GraphPattern& p,
              std::span<const std::optional<NodeIndex>> pins,
              const std::function<bool(const Assignment&)>& visit)
      : g_(g), p_(p), pins_(pins), visit_(visit) {}

  void run() {
    const std::size_t n = p_.size();
    if (!pins_.empty() && pins_.size() != n) throw ConfigError("pin vector size mismatch");
    auto pinned = [&](std::size_t v) { return !pins_.empty() && pins_[v].has_value(); };
    for (std::size_t v = 0; v < n; ++v)
      if (pinned(v) && !labels_match(p_.vars()[v].label, g_.node(*pins_[v]).label)) return;

    auto initial_size = [&](std::size_t v) -> std::size_t {
      if (pinned(v)) return 1;
      const auto& l = p_.vars()[v].label;
      return l == kWildcard ? g_.node_count() : g_.label_count(l);
    };

    // greedy order: smallest candidate set first, then grow along pattern edges
    std::vector<bool> placed(n, false);
    std::size_t first = 0;
    for (std::size_t v = 1; v < n; ++v)
      if (initial_size(v) < initial_size(first)) first = v;
    order_.push_back(first);
    placed[first] = true;
    while (order_.size() < n) {
      std::optional<std::size_t> best;
      for (std::size_t v = 0; v < n; ++v) {
        if (placed[v]) continue;
        bool adjacent = false;
        for (const auto& e : p_.edges())
          if ((e.src == v && placed[e.dst]) || (e.dst == v && placed[e.src])) adjacent = true;
        if (!adjacent) continue;
        if (!best || initial_size(v) < initial_size(*best)) best = v;
      }
      order_.push_back(*best);
      placed[*best] = true;
    }
    position_.assign(n, 0);
    for (std::size_t k = 0; k < n; ++k) position_[order_[k]] = k;

    if (pinned(first)) {
      first_candidates_.push_back(*pins_[first]);
    } else {
      const auto& l = p_.vars()[first].label;
      if (l == kWildcard) {
        for (NodeIndex i = 0; i < g_.node_count(); ++i) first_candidates_.push_back(i);
      } else {
        for (NodeIndex i = 0; i < g_.node_count(); ++i)
          if (g_.node(i).label == l) first_candidates_.push_back(i);
      }
    }
    h_.assign(n, 0);
    extend(0);
  }

 private:
  // Candidates for order_[k] drawn from one already-assigned neighbour in the pattern.
  std::vector<NodeIndex> candidates(std::size_t k) const {
    std::size_t v = order_[k];
    const auto& var = p_.vars()[v];
    std::vector<NodeIndex> out;
    for (const auto& e : p_.edges()) {
      bool out_edge = e.dst == v && position_[e.src] < k;
      bool in_edge = e.src == v && position_[e.dst] < k;
      if (!out_edge && !in_edge) continue;
      NodeIndex anchor = h_[out_edge ? e.src : e.dst];
      for (const auto& inc : g_.incident(anchor)) {
        // a self-loop is stored once, as outgoing, but also serves as an incoming edge
        if (inc.outgoing != out_edge && inc.neighbor != anchor) continue;
        if (!labels_match(g_.edge(inc.edge).label, e.label)) continue;
        if (!labels_match(g_.node(inc.neighbor).label, var.label)) continue;
        out.push_back(inc.neighbor);
      }
      break;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  bool consistent(std::size_t k) const {
    std::size_t v = order_[k];
    for (const auto& e : p_.edges()) {
      if ((e.src != v && e.dst != v) || position_[e.src] > k || position_[e.dst] > k) continue;
      if (!has_edge(g_, h_[e.src], h_[e.dst], e.label)) return false;
    }
    return true;
  }

  bool extend(std::size_t k) {
    if (k == order_.size()) return visit_(h_);
    std::size_t v = order_[k];
    auto cands = k == 0 ? first_candidates_ : candidates(k);
    for (NodeIndex c : cands) {
      if (!pins_.empty() && pins_[v] && *pins_[v] != c) continue;
      h_[v] = c;
      if (!consistent(k)) continue;
      if (!extend(k + 1)) return false;
    }
    return true;
  }

  const PropertyGraph& g_;
  const GraphPattern& p_;
  std::span<const std::optional<NodeIndex>> pins_;
  const std::function<bool(const Assignment&)>& visit_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> position_;
  std::vector<NodeIndex> first_candidates_;
  Assignment h_;
};

}  // namespace

void for_each_homomorphism(const PropertyGraph& g, const GraphPattern& p,
                           std::span<const std::optional<NodeIndex>> pins,
                           const std::function<bool(const Assignment&)>& visit) {
  Backtracker(g, p, pins, visit).run();
}

bool is_canonical(const PropertyGraph& g, const GraphPattern& p, const Assignment& h) {
  for (const auto& sigma : p.automorphisms()) {
    bool smaller = false;
    for (std::size_t i = 0; i < h.size(); ++i) {
      NodeIndex a = h[i], b = h[sigma[i]];
      if (a == b) continue;
      if (!natural_less(g.node(a).id, g.node(b).id)) return false;
      smaller = true;
      break;
    }
    if (!smaller) return false;  // fixed by a non-identity automorphism
  }
  return true;
}

MatchList match_pattern(const PropertyGraph& g, const GraphPattern& p) {
  MatchList m{p, {}};
  for_each_homomorphism(g, p, {}, [&](const Assignment& h) {
    if (is_canonical(g, p, h)) m.rows.push_back(h);
    return true;
  });
  std::sort(m.rows.begin(), m.rows.end(), [&](const Assignment& a, const Assignment& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] != b[i]) return natural_less(g.node(a[i]).id, g.node(b[i]).id);
    return false;
  });
  return m;
}

void write_matches_csv(const PropertyGraph& g, const MatchList& m, std::ostream& out) {
  std::vector<std::string> header;
  for (const auto& v : m.pattern.vars()) header.push_back(v.name);
  write_csv_row(out, header);
  for (const auto& r : m.row_ids(g)) write_csv_row(out, r);
}

// ---------------------------------------------------------------------------

bool folds_onto_subpattern(const GraphPattern& p, std::span<const std::size_t> fixed) {
  PropertyGraph self;
  for (const auto& v : p.vars()) self.add_node({v.name, v.label, std::nullopt, {}});
  for (const auto& e : p.edges()) self.add_edge({p.vars()[e.src].name, e.label, p.vars()[e.dst].name});
  std::vector<std::optional<NodeIndex>> pins(p.size());
  for (auto f : fixed) pins[f] = static_cast<NodeIndex>(f);
  bool folds = false;
  for_each_homomorphism(self, p, pins, [&](const Assignment& h) {
    std::set<NodeIndex> image(h.begin(), h.end());
    folds = image.size() < p.size();
    return !folds;
  });
  return folds;
}

std::vector<GraphPattern> mine_frequent_patterns(const PropertyGraph& g, std::size_t min_support,
                                                 std::size_t max_edges) {
  if (min_support < 1) throw ConfigError("min_support must be at least 1");
  if (max_edges < 1) throw ConfigError("max_edges must be at least 1");
  const double bound = static_cast<double>(g.node_count()) * static_cast<double>(g.node_count());
  if (static_cast<double>(min_support) > bound) return {};

  std::set<Triple> triples;
  for (const auto& e : g.edges())
    triples.emplace(g.node(e.src).label, e.label, g.node(e.dst).label);

  auto var_name = [](std::size_t i) { return "x" + std::to_string(i); };
  auto has_any_match = [&](const GraphPattern& p) {
    bool found = false;
    for_each_homomorphism(g, p, {}, [&](const Assignment&) {
      found = true;
      return false;
    });
    return found;
  };

  std::map<std::string, GraphPattern> seen;
  std::vector<GraphPattern> frontier;
  auto consider = [&](std::vector<PatternVar> vars, std::vector<PatternEdge> edges,
                      std::vector<GraphPattern>& next) {
    GraphPattern p(std::move(vars), std::move(edges));
    if (seen.count(p.canonical_code())) return;
    if (!has_any_match(p)) return;
    seen.emplace(p.canonical_code(), p);
    next.push_back(std::move(p));
  };

  for (const auto& [sl, el, dl] : triples)
    consider({{var_name(0), sl}, {var_name(1), dl}}, {{0, el, 1}}, frontier);

  for (std::size_t level = 1; level < max_edges; ++level) {
    std::vector<GraphPattern> next;
    for (const auto& p : frontier) {
      std::vector<PatternVar> vars(p.vars().begin(), p.vars().end());
      std::vector<PatternEdge> edges(p.edges().begin(), p.edges().end());
      // edge between existing vars
      for (std::size_t a = 0; a < vars.size(); ++a)
        for (std::size_t b = 0; b < vars.size(); ++b) {
          if (a == b) continue;
          for (const auto& [sl, el, dl] : triples) {
            if (sl != vars[a].label || dl != vars[b].label) continue;
            PatternEdge ne{a, el, b};
            if (std::find(edges.begin(), edges.end(), ne) != edges.end()) continue;
            auto e2 = edges;
            e2.push_back(ne);
            consider(vars, std::move(e2), next);
          }
        }
      // edge to a fresh var
      if (vars.size() < 8)
        for (std::size_t a = 0; a < vars.size(); ++a)
          for (const auto& [sl, el, dl] : triples) {
            std::size_t fresh = vars.size();
            if (sl == vars[a].label) {
              auto v2 = vars;
              v2.push_back({var_name(fresh), dl});
              auto e2 = edges;
              e2.push_back({a, el, fresh});
              consider(std::move(v2), std::move(e2), next);
            }
            if (dl == vars[a].label) {
              auto v2 = vars;
              v2.push_back({var_name(fresh), sl});
              auto e2 = edges;
              e2.push_back({fresh, el, a});
              consider(std::move(v2), std::move(e2), next);
            }
          }
    }
    frontier = std::move(next);
  }

  std::vector<GraphPattern> out;
  for (const auto& [code, p] : seen) {
    std::size_t count = 0;
    for_each_homomorphism(g, p, {}, [&](const Assignment& h) {
      if (is_canonical(g, p, h)) ++count;
      return count < min_support;
    });
    if (count >= min_support) out.push_back(p);
  }
  std::stable_sort(out.begin(), out.end(), [](const GraphPattern& a, const GraphPattern& b) {
    if (a.edges().size() != b.edges().size()) return a.edges().size() < b.edges().size();
    return a.canonical_code() < b.canonical_code();
  });
  return out;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> PseudoRelation::column(std::string_view var, std::string_view attr) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].var == var && columns[i].attr == attr) return i;
  return std::nullopt;
}

PseudoRelation to_pseudo_relation(const PropertyGraph& g, const MatchList& m,
                                  std::span<const std::string> attrs,
                                  std::span<const std::string> relations) {
  if (attrs.empty() && relations.empty()) throw ConfigError("pseudo-relation needs at least one attribute");
  PseudoRelation pr;
  for (const auto& v : m.pattern.vars()) {
    for (const auto& a : attrs) pr.columns.push_back({v.name, a});
    for (const auto& r : relations) pr.columns.push_back({v.name, std::string(kRelPrefix) + r});
    pr.columns.push_back({v.name, std::string(kEidColumn)});
  }
  for (const auto& h : m.rows) {
    std::vector<std::string> row;
    row.reserve(pr.columns.size());
    for (std::size_t vi = 0; vi < h.size(); ++vi) {
      const Node& n = g.node(h[vi]);
      for (const auto& a : attrs) {
        const AttrValue* val = n.attr(a);
        row.push_back(val ? val->text : std::string(kWildcard));
      }
      for (const auto& r : relations) {
        std::vector<std::string> targets;
        for (const auto& inc : g.incident(h[vi]))
          if (inc.outgoing && g.edge(inc.edge).label == r) targets.push_back(g.node(inc.neighbor).id);
        std::sort(targets.begin(), targets.end(), NaturalLess{});
        targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
        std::string cell;
        for (std::size_t t = 0; t < targets.size(); ++t) cell += (t ? "|" : "") + targets[t];
        row.push_back(std::move(cell));
      }
      row.push_back(n.eid ? *n.eid : std::string(kWildcard));
    }
    pr.rows.push_back(std::move(row));
  }
  return pr;
}

void write_pseudo_relation_csv(const PseudoRelation& pr, std::ostream& out) {
  std::vector<std::string> header;
  for (const auto& c : pr.columns) header.push_back(c.var + "." + c.attr);
  write_csv_row(out, header);
  for (const auto& r : pr.rows) write_csv_row(out, r);
}

}  // namespace grapher
