#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grapher/blocker.hpp"
#include "grapher/common.hpp"
#include "grapher/graph.hpp"

namespace grapher {

struct BlockEdge {
  NodePair pair;
  std::vector<std::uint32_t> blocks;  // indices of the blocks holding both endpoints
  double weight = 0;
  std::optional<double> dice;  // nullopt: no shared attribute (cross-type)
};

// Co-occurrence graph over all blocks; edges sorted by pair.
struct BlockGraph {
  std::vector<Block> blocks;
  std::vector<BlockEdge> edges;

  std::vector<NodePair> pairs() const;
};

BlockGraph build_block_graph(std::vector<Block> blocks);

struct WeightNorms {
  double alpha = 1;  // max over edges of Σ 1/|B_i|
  double beta = 1;   // max over edges of |𝔹(e)|
};

WeightNorms compute_norms(const BlockGraph& bg);
// Harmonic mean of Arcs = Σ(1/|B_i|)/α and Cbs = |𝔹(e)|/β.
double edge_weight(std::span<const std::size_t> block_sizes, const WeightNorms& norms);
void compute_weights(BlockGraph& bg);
double average_weight(const BlockGraph& bg);
// Drops edges with W < avW (ties survive).
BlockGraph prune_by_weight(const BlockGraph& bg);
BlockGraph prune_by_weight(const BlockGraph& bg, double avw);

// Mean over shared non-wildcard attributes of the dice coefficient of the case-folded,
// whitespace-free character sets.
std::optional<double> dice(const Node& a, const Node& b);
void compute_dice(BlockGraph& bg, const PropertyGraph& g);

struct LabelledPair {
  std::optional<double> dice;
  bool match = false;
};

std::vector<double> default_dice_grid();  // 0, 0.05, …, 1
double learn_dice_threshold(std::span<const LabelledPair> sample, std::span<const double> grid, double epsilon);

// Drops edges with dice < ϑ and cross-type edges.
BlockGraph prune_by_dice(const BlockGraph& bg, double theta);

// v, v', W, dice, stage ("weight" / "dice" when pruned there, "survived" otherwise).
void write_pruned_pairs_csv(std::ostream& out, const BlockGraph& all, const BlockGraph& after_weight,
                            const BlockGraph& after_dice);

}  // namespace grapher
