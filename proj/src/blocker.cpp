#include "grapher/blocker.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <set>

#include "grapher/common.hpp"
#include "grapher/parallel.hpp"

namespace grapher {

std::string_view to_string(BlockSource s) {
  switch (s) {
    case BlockSource::structural: return "structural";
    case BlockSource::attribute: return "attribute";
    case BlockSource::merged: return "merged";
  }
  return "merged";
}

LshIndex::LshIndex(const EmbeddingTable& emb, std::size_t tables, std::size_t bits, std::uint64_t seed,
                   BlockSource source)
    : emb_(emb), bits_(bits), source_(source) {
  if (tables < 1 || bits < 1 || bits > 64) throw ConfigError("LSH needs L >= 1 and 1 <= b <= 64");
  if (emb.empty()) throw DataError("cannot index an empty embedding table");
  const std::size_t d = emb.dim();
  planes_.resize(tables * bits * d);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (std::size_t p = 0; p < tables * bits; ++p) {
    double* h = &planes_[p * d];
    double n = 0;
    do {
      n = 0;
      for (std::size_t k = 0; k < d; ++k) {
        h[k] = gauss(rng);
        n += h[k] * h[k];
      }
    } while (n == 0);
    n = std::sqrt(n);
    for (std::size_t k = 0; k < d; ++k) h[k] /= n;
  }
  buckets_.resize(tables);
  for (std::size_t i = 0; i < emb.size(); ++i)
    for (std::size_t t = 0; t < tables; ++t) buckets_[t][bucket_key(t, emb.row(i))].push_back(i);
}

std::span<const double> LshIndex::hyperplane(std::size_t table, std::size_t bit) const {
  const std::size_t d = emb_.dim();
  return {&planes_[(table * bits_ + bit) * d], d};
}

std::uint64_t LshIndex::bucket_key(std::size_t table, std::span<const double> v) const {
  std::uint64_t key = 0;
  for (std::size_t j = 0; j < bits_; ++j)
    if (dot(hyperplane(table, j), v) >= 0) key |= std::uint64_t{1} << j;
  return key;
}

const std::vector<std::size_t>* LshIndex::bucket(std::size_t table, std::uint64_t key) const {
  auto it = buckets_[table].find(key);
  return it == buckets_[table].end() ? nullptr : &it->second;
}

std::vector<std::size_t> LshIndex::candidates(std::span<const double> v) const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < buckets_.size(); ++t)
    if (auto* b = bucket(t, bucket_key(t, v))) out.insert(out.end(), b->begin(), b->end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

LshIndex build_lsh_index(const EmbeddingTable& emb, std::size_t tables, std::size_t bits, std::uint64_t seed,
                         BlockSource source) {
  return LshIndex(emb, tables, bits, seed, source);
}

Block query_block(const LshIndex& index, std::string_view q, const PropertyGraph& g, double max_dist,
                  std::size_t cap) {
  const auto& emb = index.embeddings();
  auto qi = emb.index_of(q);
  if (!qi) throw NotFoundError("query '" + std::string(q) + "' is not indexed");
  const auto& label = g.node(q).label;
  auto qv = emb.row(*qi);
  std::vector<std::pair<double, std::string_view>> near;
  for (auto i : index.candidates(qv)) {
    if (i == *qi) continue;
    const auto& key = emb.keys()[i];
    auto ni = g.find(key);
    if (!ni || g.node(*ni).label != label) continue;
    double dist = cosine_distance(qv, emb.row(i));
    if (dist <= max_dist) near.emplace_back(dist, key);
  }
  std::sort(near.begin(), near.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return natural_less(a.second, b.second);
  });
  Block block{std::string(q), {std::string(q)}, index.source()};
  for (const auto& [dist, key] : near) {
    if (block.members.size() >= std::max<std::size_t>(cap, 1)) break;
    block.members.emplace_back(key);
  }
  std::sort(block.members.begin(), block.members.end(), NaturalLess{});
  return block;
}

std::vector<Block> generate_blocks(const EmbeddingTable* structural, const EmbeddingTable* attribute,
                                   const PropertyGraph& g, const BlockerParams& params) {
  if (structural && structural->empty()) structural = nullptr;
  if (attribute && attribute->empty()) attribute = nullptr;
  std::set<std::string, NaturalLess> queries;
  for (const auto* table : {structural, attribute}) {
    if (!table) continue;
    for (const auto& key : table->keys()) {
      auto ni = g.find(key);
      if (!ni) continue;
      const auto& label = g.node(*ni).label;
      if (params.labels.empty() ||
          std::find(params.labels.begin(), params.labels.end(), label) != params.labels.end())
        queries.insert(key);
    }
  }
  std::optional<LshIndex> s_index, a_index;
  if (structural) s_index.emplace(*structural, params.tables, params.bits, params.seed, BlockSource::structural);
  if (attribute)
    a_index.emplace(*attribute, params.tables, params.bits, params.seed ^ 0xa77b, BlockSource::attribute);

  std::vector<std::string> qs(queries.begin(), queries.end());
  std::vector<Block> blocks(qs.size());
  parallel_for(qs.size(), params.workers, [&](std::size_t i) {
    const auto& q = qs[i];
    std::set<std::string, NaturalLess> members{q};
    bool from_s = false, from_a = false;
    if (s_index && structural->contains(q)) {
      auto b = query_block(*s_index, q, g, params.max_dist, params.cap);
      members.insert(b.members.begin(), b.members.end());
      from_s = true;
    }
    if (a_index && attribute->contains(q)) {
      auto b = query_block(*a_index, q, g, params.max_dist, params.cap);
      members.insert(b.members.begin(), b.members.end());
      from_a = true;
    }
    blocks[i] = Block{q, {members.begin(), members.end()},
                      from_s && from_a ? BlockSource::merged
                                       : (from_s ? BlockSource::structural : BlockSource::attribute)};
  });
  return blocks;
}

std::size_t candidate_pair_count(std::span<const Block> blocks) {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.pair_count();
  return n;
}

void write_blocks(std::ostream& out, std::span<const Block> blocks) {
  for (const auto& b : blocks) {
    out << b.query << '\t';
    for (std::size_t i = 0; i < b.members.size(); ++i) out << (i ? "," : "") << b.members[i];
    out << '\n';
  }
}

std::vector<Block> read_blocks(std::istream& in) {
  std::vector<Block> blocks;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("block line " + std::to_string(line_no) + " has no tab");
    Block b;
    b.query = line.substr(0, tab);
    for (auto& m : split(std::string_view(line).substr(tab + 1), ','))
      if (!m.empty()) b.members.push_back(m);
    if (std::find(b.members.begin(), b.members.end(), b.query) == b.members.end())
      throw DataError("block line " + std::to_string(line_no) + " does not contain its query");
    std::sort(b.members.begin(), b.members.end(), NaturalLess{});
    blocks.push_back(std::move(b));
  }
  return blocks;
}

}  // namespace grapher
