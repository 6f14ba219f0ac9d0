#include "grapher/matcher.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "grapher/parallel.hpp"

namespace grapher {

std::string_view to_string(MatchReason r) {
  switch (r) {
    case MatchReason::satisfied_rule: return "satisfied-rule";
    case MatchReason::no_pattern_match: return "no-pattern-match";
    case MatchReason::constraints_violated: return "constraints-violated";
  }
  return "no-pattern-match";
}

MatchDecision confirm_match(const NodePair& pair, std::span<const Gdd> rules, const PropertyGraph& g) {
  MatchDecision d{pair, false, std::nullopt, MatchReason::no_pattern_match};
  const NodeIndex a = g.index_of(pair.first), b = g.index_of(pair.second);
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const auto& rule = rules[r];
    const auto x = rule.scope.require_var(rule.eid_vars.first);
    const auto x2 = rule.scope.require_var(rule.eid_vars.second);
    for (auto [u, v] : {std::pair{a, b}, std::pair{b, a}}) {
      std::vector<std::optional<NodeIndex>> pins(rule.scope.size());
      pins[x] = u;
      pins[x2] = v;
      for_each_homomorphism(g, rule.scope, pins, [&](const Assignment& h) {
        d.reason = MatchReason::constraints_violated;
        MatchAccessor row(g, rule.scope, h);
        if (!satisfies_lhs(rule, row)) return true;
        Witness w{r, h, {}};
        for (const auto& c : rule.lhs) w.distances.push_back(measure(c, row));
        d.witness = std::move(w);
        return false;
      });
      if (d.witness) {
        d.linked = true;
        d.reason = MatchReason::satisfied_rule;
        return d;
      }
      if (u == v) break;
    }
  }
  return d;
}

bool replay_witness(const MatchDecision& d, std::span<const Gdd> rules, const PropertyGraph& g) {
  if (!d.linked || !d.witness || d.witness->rule >= rules.size()) return false;
  const auto& rule = rules[d.witness->rule];
  const auto& h = d.witness->h;
  if (h.size() != rule.scope.size()) return false;
  for (std::size_t i = 0; i < h.size(); ++i)
    if (h[i] >= g.node_count() || !labels_match(g.node(h[i]).label, rule.scope.vars()[i].label)) return false;
  for (const auto& pe : rule.scope.edges()) {
    bool found = false;
    for (const auto& inc : g.incident(h[pe.src]))
      if (inc.outgoing && inc.neighbor == h[pe.dst] && labels_match(g.edge(inc.edge).label, pe.label)) found = true;
    if (!found) return false;
  }
  NodePair pinned(g.node(h[rule.scope.require_var(rule.eid_vars.first)]).id,
                  g.node(h[rule.scope.require_var(rule.eid_vars.second)]).id);
  if (!(pinned == d.pair)) return false;
  return satisfies_lhs(rule, MatchAccessor(g, rule.scope, h));
}

nlohmann::ordered_json decision_to_json(const MatchDecision& d, std::span<const Gdd> rules, const PropertyGraph& g) {
  nlohmann::ordered_json j;
  j["pair"] = {d.pair.first, d.pair.second};
  j["linked"] = d.linked;
  j["reason"] = std::string(to_string(d.reason));
  if (d.witness) {
    const auto& rule = rules[d.witness->rule];
    nlohmann::ordered_json w;
    w["rule"] = d.witness->rule;
    w["rule_text"] = describe(rule);
    nlohmann::ordered_json h = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < rule.scope.size(); ++i) h[rule.scope.vars()[i].name] = g.node(d.witness->h[i]).id;
    w["h"] = h;
    nlohmann::ordered_json dist = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < rule.lhs.size(); ++i) {
      const auto& c = rule.lhs[i];
      dist.push_back({{"form", std::string(to_string(c.form))},
                      {"var", c.var},
                      {"attr", c.attr},
                      {"distance", d.witness->distances[i]},
                      {"t", c.threshold}});
    }
    w["distances"] = dist;
    j["witness"] = w;
  }
  return j;
}

UnionFind::UnionFind(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

std::size_t UnionFind::add() {
  parent_.push_back(parent_.size());
  rank_.push_back(0);
  return parent_.size() - 1;
}

std::size_t UnionFind::find(std::size_t x) {
  std::size_t root = x;
  while (parent_[root] != root) root = parent_[root];
  while (parent_[x] != root) x = std::exchange(parent_[x], root);
  return root;
}

bool UnionFind::unite(std::size_t a, std::size_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (rank_[a] < rank_[b]) std::swap(a, b);
  parent_[b] = a;
  if (rank_[a] == rank_[b]) ++rank_[a];
  return true;
}

std::vector<std::vector<std::string>> connected_components(std::span<const NodePair> pairs) {
  std::map<std::string, std::size_t, NaturalLess> ids;
  UnionFind uf;
  auto id = [&](const std::string& s) {
    auto [it, fresh] = ids.emplace(s, 0);
    if (fresh) it->second = uf.add();
    return it->second;
  };
  for (const auto& p : pairs) uf.unite(id(p.first), id(p.second));
  std::map<std::size_t, std::vector<std::string>> groups;
  for (const auto& [name, i] : ids) groups[uf.find(i)].push_back(name);
  std::vector<std::vector<std::string>> out;
  for (auto& [root, members] : groups)
    if (members.size() >= 2) out.push_back(std::move(members));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return natural_less(a[0], b[0]); });
  return out;
}

LinkedEntityGraph link_entities(std::span<const NodePair> candidates, std::span<const Gdd> rules,
                                const PropertyGraph& g, std::size_t workers) {
  if (rules.empty()) throw ConfigError("matching needs at least one rule");
  LinkedEntityGraph out;
  out.rules = rank_rules({rules.begin(), rules.end()});
  out.decisions.resize(candidates.size());
  parallel_for(candidates.size(), workers,
               [&](std::size_t i) { out.decisions[i] = confirm_match(candidates[i], out.rules, g); });
  std::set<NodePair> linked;
  for (const auto& d : out.decisions)
    if (d.linked) linked.insert(d.pair);
  out.pairs.assign(linked.begin(), linked.end());
  out.clusters = connected_components(out.pairs);
  return out;
}

std::vector<NodePair> knn_match(const EmbeddingTable& emb, std::size_t k, const PropertyGraph& g) {
  if (k < 1) throw ConfigError("kNN matcher needs k >= 1");
  std::vector<std::string> labels(emb.size());
  std::vector<double> norms(emb.size());
  for (std::size_t i = 0; i < emb.size(); ++i) {
    auto ni = g.find(emb.keys()[i]);
    labels[i] = ni ? g.node(*ni).label : std::string();
    norms[i] = norm(emb.row(i));
  }
  std::set<NodePair> pairs;
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    if (labels[i].empty()) continue;
    scored.clear();
    for (std::size_t j = 0; j < emb.size(); ++j) {
      if (j == i || labels[j] != labels[i]) continue;
      const double sim = norms[i] == 0 || norms[j] == 0 ? 0.0 : dot(emb.row(i), emb.row(j)) / (norms[i] * norms[j]);
      scored.emplace_back(sim, j);
    }
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    for (std::size_t t = 0; t < take; ++t) pairs.insert(NodePair(emb.keys()[i], emb.keys()[scored[t].second]));
  }
  return {pairs.begin(), pairs.end()};
}

}  // namespace grapher
