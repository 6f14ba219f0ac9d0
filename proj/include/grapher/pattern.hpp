#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "grapher/graph.hpp"

namespace grapher {

struct PatternVar {
  std::string name;
  std::string label;

  bool operator==(const PatternVar&) const = default;
};

struct PatternEdge {
  std::size_t src;
  std::string label;
  std::size_t dst;

  bool operator==(const PatternEdge&) const = default;
};

// Q[ū]: variables with labels ("*" allowed) and labelled directed edges between them.
// Always non-empty and connected.
class GraphPattern {
 public:
  GraphPattern(std::vector<PatternVar> vars, std::vector<PatternEdge> edges);

  std::span<const PatternVar> vars() const { return vars_; }
  std::span<const PatternEdge> edges() const { return edges_; }
  std::size_t size() const { return vars_.size(); }
  std::optional<std::size_t> var_index(std::string_view name) const;
  std::size_t require_var(std::string_view name) const;

  // Non-identity label-preserving automorphisms, each as a permutation of var indices.
  const std::vector<std::vector<std::size_t>>& automorphisms() const { return automorphisms_; }

  // Label-level canonical form; equal for patterns that differ only by var naming/order.
  const std::string& canonical_code() const { return code_; }

  bool operator==(const GraphPattern& o) const { return vars_ == o.vars_ && edges_ == o.edges_; }

 private:
  std::vector<PatternVar> vars_;
  std::vector<PatternEdge> edges_;
  std::vector<std::vector<std::size_t>> automorphisms_;
  std::string code_;
};

nlohmann::json pattern_to_json(const GraphPattern& p);
GraphPattern pattern_from_json(const nlohmann::json& j);
GraphPattern load_pattern_file(const std::string& path);

using Assignment = std::vector<NodeIndex>;

struct MatchList {
  GraphPattern pattern;
  std::vector<Assignment> rows;

  std::vector<std::vector<std::string>> row_ids(const PropertyGraph& g) const;
};

// Enumerates raw homomorphisms (no symmetry canonicalisation). `pins` fixes selected vars
// (std::nullopt = free); the callback returns false to stop early.
void for_each_homomorphism(const PropertyGraph& g, const GraphPattern& p,
                           std::span<const std::optional<NodeIndex>> pins,
                           const std::function<bool(const Assignment&)>& visit);

// True when h is the representative of its orbit under the pattern's automorphisms:
// strictly smaller (natural id order, var-by-var) than every non-identity image.
bool is_canonical(const PropertyGraph& g, const GraphPattern& p, const Assignment& h);

// Every homomorphism, one per symmetry orbit, rows sorted.
MatchList match_pattern(const PropertyGraph& g, const GraphPattern& p);

void write_matches_csv(const PropertyGraph& g, const MatchList& m, std::ostream& out);

// True when some homomorphism of p into itself that keeps the `fixed` vars in place uses fewer
// than all vars, i.e. p is not a core relative to them and matches no more (x, x') bindings
// than a smaller pattern.
bool folds_onto_subpattern(const GraphPattern& p, std::span<const std::size_t> fixed);

std::vector<GraphPattern> mine_frequent_patterns(const PropertyGraph& g, std::size_t min_support,
                                                 std::size_t max_edges);

struct PseudoColumn {
  std::string var;
  std::string attr;  // attribute name, "eid", or "rel:<edge label>"

  bool operator==(const PseudoColumn&) const = default;
};

inline constexpr std::string_view kEidColumn = "eid";
inline constexpr std::string_view kRelPrefix = "rel:";

struct PseudoRelation {
  std::vector<PseudoColumn> columns;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view var, std::string_view attr) const;
};

// One row per match; missing attribute or eid -> "*". Relation columns hold the
// '|'-joined target ids of the var's outgoing edges with that label.
PseudoRelation to_pseudo_relation(const PropertyGraph& g, const MatchList& m,
                                  std::span<const std::string> attrs,
                                  std::span<const std::string> relations = {});

void write_pseudo_relation_csv(const PseudoRelation& pr, std::ostream& out);

}  // namespace grapher
