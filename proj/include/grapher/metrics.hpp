#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "grapher/blocker.hpp"
#include "grapher/common.hpp"
#include "grapher/graph.hpp"

namespace grapher {

// Same-label pairs sharing an eid.
struct GroundTruth {
  std::set<NodePair> pairs;
  std::map<std::string, std::size_t> label_counts;

  bool contains(const NodePair& p) const { return pairs.count(p) != 0; }
};

GroundTruth ground_truth(const PropertyGraph& g);
bool has_eids(const PropertyGraph& g);

struct PairMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t predicted = 0;
  std::size_t truth = 0;
  std::size_t correct = 0;
  bool empty_prediction = false;  // precision reported as 0 by convention
};

// Throws DataError when the ground truth is empty.
PairMetrics pair_metrics(std::span<const NodePair> predicted, const GroundTruth& truth);

// |cands| / Σ over candidate labels of |V_l|(|V_l|−1)/2.
double cssr_g(std::span<const NodePair> candidates, const PropertyGraph& g);

// Mean over blocks of the fraction of true pairs; blocks of one node count as 1.
double purity(std::span<const Block> blocks, const GroundTruth& truth);

struct NoiseSpec {
  std::string label;
  double duplicate_rate = 0.1;
  bool attribute_noise = false;
  bool structural_noise = false;
  std::uint64_t seed = 1;
};

struct NoisyGraph {
  PropertyGraph graph;
  GroundTruth truth;
};

// Returns a value at Levenshtein distance exactly 2 from `value`.
std::string perturb_value(std::string_view value, std::mt19937_64& rng);

// Duplicates a sample of `label` nodes with fresh ids and the original's eid (the node id when
// the original has none), optionally perturbing attributes and deleting up to half the edges.
NoisyGraph generate_noisy(const PropertyGraph& g, const NoiseSpec& spec);

// Seeded person / city / company graph with unique eids on persons; the base for synthetic
// duplicate benchmarks.
struct SyntheticSpec {
  std::size_t persons = 1500;
  std::size_t cities = 100;
  std::size_t companies = 400;
  std::uint64_t seed = 1;
};

PropertyGraph synthetic_people_graph(const SyntheticSpec& spec);

nlohmann::ordered_json metrics_to_json(const PairMetrics& m);

}  // namespace grapher
