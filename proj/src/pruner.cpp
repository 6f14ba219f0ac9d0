#include "grapher/pruner.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <unordered_set>

namespace grapher {

std::vector<NodePair> BlockGraph::pairs() const {
  std::vector<NodePair> out;
  out.reserve(edges.size());
  for (const auto& e : edges) out.push_back(e.pair);
  return out;
}

BlockGraph build_block_graph(std::vector<Block> blocks) {
  BlockGraph bg;
  bg.blocks = std::move(blocks);
  std::map<NodePair, std::vector<std::uint32_t>> registry;
  for (std::uint32_t b = 0; b < bg.blocks.size(); ++b) {
    const auto& m = bg.blocks[b].members;
    for (std::size_t i = 0; i < m.size(); ++i)
      for (std::size_t j = i + 1; j < m.size(); ++j) registry[NodePair(m[i], m[j])].push_back(b);
  }
  for (auto& [pair, blocks_of] : registry) bg.edges.push_back(BlockEdge{pair, std::move(blocks_of), 0, std::nullopt});
  return bg;
}

namespace {

double arcs_sum(const BlockGraph& bg, const BlockEdge& e) {
  double s = 0;
  for (auto b : e.blocks) s += 1.0 / static_cast<double>(bg.blocks[b].members.size());
  return s;
}

}  // namespace

WeightNorms compute_norms(const BlockGraph& bg) {
  WeightNorms n{0, 0};
  for (const auto& e : bg.edges) {
    n.alpha = std::max(n.alpha, arcs_sum(bg, e));
    n.beta = std::max(n.beta, static_cast<double>(e.blocks.size()));
  }
  if (n.alpha == 0) n.alpha = 1;
  if (n.beta == 0) n.beta = 1;
  return n;
}

double edge_weight(std::span<const std::size_t> block_sizes, const WeightNorms& norms) {
  if (block_sizes.empty()) return 0.0;
  double arcs = 0;
  for (auto s : block_sizes) arcs += 1.0 / static_cast<double>(s);
  arcs /= norms.alpha;
  const double cbs = static_cast<double>(block_sizes.size()) / norms.beta;
  return 2 * arcs * cbs / (arcs + cbs);
}

void compute_weights(BlockGraph& bg) {
  const auto norms = compute_norms(bg);
  std::vector<std::size_t> sizes;
  for (auto& e : bg.edges) {
    sizes.clear();
    for (auto b : e.blocks) sizes.push_back(bg.blocks[b].members.size());
    e.weight = edge_weight(sizes, norms);
  }
}

double average_weight(const BlockGraph& bg) {
  if (bg.edges.empty()) return 0.0;
  double s = 0;
  for (const auto& e : bg.edges) s += e.weight;
  return s / static_cast<double>(bg.edges.size());
}

BlockGraph prune_by_weight(const BlockGraph& bg, double avw) {
  BlockGraph out{bg.blocks, {}};
  for (const auto& e : bg.edges)
    if (!(e.weight < avw)) out.edges.push_back(e);
  return out;
}

BlockGraph prune_by_weight(const BlockGraph& bg) { return prune_by_weight(bg, average_weight(bg)); }

namespace {

std::set<char> char_set(std::string_view text) {
  std::set<char> s;
  for (char c : case_fold(text))
    if (!std::isspace(static_cast<unsigned char>(c))) s.insert(c);
  return s;
}

}  // namespace

std::optional<double> dice(const Node& a, const Node& b) {
  double total = 0;
  std::size_t shared = 0;
  for (const auto& attr : a.attrs) {
    const AttrValue* other = b.attr(attr.name);
    if (!other || attr.value.text == kWildcard || other->text == kWildcard) continue;
    auto x = char_set(attr.value.text), y = char_set(other->text);
    if (x.empty() && y.empty()) continue;
    std::size_t common = 0;
    for (char c : x) common += y.count(c);
    total += 2.0 * static_cast<double>(common) / static_cast<double>(x.size() + y.size());
    ++shared;
  }
  if (!shared) return std::nullopt;
  return total / static_cast<double>(shared);
}

void compute_dice(BlockGraph& bg, const PropertyGraph& g) {
  for (auto& e : bg.edges) e.dice = dice(g.node(e.pair.first), g.node(e.pair.second));
}

std::vector<double> default_dice_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
  return grid;
}

double learn_dice_threshold(std::span<const LabelledPair> sample, std::span<const double> grid, double epsilon) {
  if (!(epsilon >= 0 && epsilon < 1)) throw ConfigError("recall-loss budget must be in [0, 1)");
  if (grid.empty()) throw ConfigError("dice threshold grid is empty");
  std::size_t positives = 0;
  for (const auto& p : sample) positives += p.match ? 1 : 0;
  if (!positives)
    throw ConfigError("labelled sample has no true match; set the dice threshold manually (prune.dice_threshold)");
  auto recall = [&](double theta) {
    std::size_t kept = 0;
    for (const auto& p : sample)
      if (p.match && p.dice && *p.dice >= theta) ++kept;
    return static_cast<double>(kept) / static_cast<double>(positives);
  };
  const double target = (1.0 - epsilon) * recall(0.0);
  double best = 0.0;
  for (double theta : grid) {
    if (theta < 0 || theta > 1) throw ConfigError("dice thresholds must lie in [0, 1]");
    if (theta > best && recall(theta) >= target - 1e-12) best = theta;
  }
  return best;
}

BlockGraph prune_by_dice(const BlockGraph& bg, double theta) {
  if (theta < 0 || theta > 1) throw ConfigError("dice threshold must lie in [0, 1]");
  BlockGraph out{bg.blocks, {}};
  for (const auto& e : bg.edges)
    if (e.dice && *e.dice >= theta) out.edges.push_back(e);
  return out;
}

void write_pruned_pairs_csv(std::ostream& out, const BlockGraph& all, const BlockGraph& after_weight,
                            const BlockGraph& after_dice) {
  std::unordered_set<NodePair, NodePairHash> w(after_weight.edges.size()), d(after_dice.edges.size());
  for (const auto& e : after_weight.edges) w.insert(e.pair);
  for (const auto& e : after_dice.edges) d.insert(e.pair);
  std::vector<std::string> row{"v", "v'", "W", "dice", "stage"};
  write_csv_row(out, row);
  for (const auto& e : all.edges) {
    row = {e.pair.first, e.pair.second, format_double(e.weight), e.dice ? format_double(*e.dice) : "cross-type",
           d.count(e.pair) ? "survived" : (w.count(e.pair) ? "dice" : "weight")};
    write_csv_row(out, row);
  }
}

}  // namespace grapher
