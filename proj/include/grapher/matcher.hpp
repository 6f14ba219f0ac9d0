#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "grapher/common.hpp"
#include "grapher/embedding.hpp"
#include "grapher/gdd.hpp"
#include "grapher/graph.hpp"
#include "grapher/pattern.hpp"

namespace grapher {

enum class MatchReason { satisfied_rule, no_pattern_match, constraints_violated };

std::string_view to_string(MatchReason r);

struct Witness {
  std::size_t rule = 0;  // index into the rule list the decision was made against
  Assignment h;
  std::vector<double> distances;  // measured value per LHS constraint
};

struct MatchDecision {
  NodePair pair;
  bool linked = false;
  std::optional<Witness> witness;
  MatchReason reason = MatchReason::no_pattern_match;
};

// Tries the rules in the given order (callers pass rank_rules output), pinning the pair to
// each rule's eid vars in both orientations.
MatchDecision confirm_match(const NodePair& pair, std::span<const Gdd> rules, const PropertyGraph& g);

// Re-checks a linked decision's witness from scratch.
bool replay_witness(const MatchDecision& d, std::span<const Gdd> rules, const PropertyGraph& g);

nlohmann::ordered_json decision_to_json(const MatchDecision& d, std::span<const Gdd> rules, const PropertyGraph& g);

class UnionFind {
 public:
  explicit UnionFind(std::size_t n = 0);
  std::size_t add();
  std::size_t find(std::size_t x);
  bool unite(std::size_t a, std::size_t b);
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> rank_;
};

struct LinkedEntityGraph {
  std::vector<NodePair> pairs;                     // sorted
  std::vector<std::vector<std::string>> clusters;  // components with >= 2 members
  std::vector<MatchDecision> decisions;            // one per candidate, candidate order
  std::vector<Gdd> rules;                          // ranked; witnesses index into this
};

// Connected components of the pairs, members and clusters in natural order.
std::vector<std::vector<std::string>> connected_components(std::span<const NodePair> pairs);

LinkedEntityGraph link_entities(std::span<const NodePair> candidates, std::span<const Gdd> rules,
                                const PropertyGraph& g, std::size_t workers = 1);

// For each embedded node, its k most cosine-similar same-label nodes; unordered pairs, sorted.
// Ties go to the earlier table row.
std::vector<NodePair> knn_match(const EmbeddingTable& emb, std::size_t k, const PropertyGraph& g);

}  // namespace grapher
