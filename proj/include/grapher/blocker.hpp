#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "grapher/embedding.hpp"
#include "grapher/graph.hpp"

namespace grapher {

enum class BlockSource { structural, attribute, merged };

std::string_view to_string(BlockSource s);

// Random-hyperplane LSH: L tables of b sign bits each.
class LshIndex {
 public:
  LshIndex(const EmbeddingTable& emb, std::size_t tables, std::size_t bits, std::uint64_t seed,
           BlockSource source = BlockSource::structural);

  std::size_t tables() const { return buckets_.size(); }
  std::size_t bits() const { return bits_; }
  BlockSource source() const { return source_; }
  const EmbeddingTable& embeddings() const { return emb_; }

  std::uint64_t bucket_key(std::size_t table, std::span<const double> v) const;
  // Row indices sharing a bucket with `v` in any table, ascending, deduplicated.
  std::vector<std::size_t> candidates(std::span<const double> v) const;
  const std::vector<std::size_t>* bucket(std::size_t table, std::uint64_t key) const;
  std::span<const double> hyperplane(std::size_t table, std::size_t bit) const;

 private:
  const EmbeddingTable& emb_;
  std::size_t bits_;
  BlockSource source_;
  std::vector<double> planes_;  // tables × bits × dim
  std::vector<std::unordered_map<std::uint64_t, std::vector<std::size_t>>> buckets_;
};

LshIndex build_lsh_index(const EmbeddingTable& emb, std::size_t tables, std::size_t bits, std::uint64_t seed,
                         BlockSource source = BlockSource::structural);

struct Block {
  std::string query;
  std::vector<std::string> members;  // natural order, includes the query
  BlockSource source = BlockSource::merged;

  std::size_t pair_count() const { return members.size() * (members.size() - 1) / 2; }
  bool operator==(const Block&) const = default;
};

// q's LSH candidates with the same node label and cosine distance <= max_dist, nearest
// first, truncated to `cap` members (q always kept).
Block query_block(const LshIndex& index, std::string_view q, const PropertyGraph& g, double max_dist,
                  std::size_t cap);

struct BlockerParams {
  std::size_t tables = 16;
  std::size_t bits = 12;
  double max_dist = 0.3;
  std::size_t cap = 10;
  std::uint64_t seed = 1;
  std::vector<std::string> labels;  // query labels; empty = every embedded node
  std::size_t workers = 1;
};

// One block per query node: structural block ∪ attribute block. Either table may be null.
std::vector<Block> generate_blocks(const EmbeddingTable* structural, const EmbeddingTable* attribute,
                                   const PropertyGraph& g, const BlockerParams& params);

std::size_t candidate_pair_count(std::span<const Block> blocks);

// "query<TAB>m1,m2,…" per line.
void write_blocks(std::ostream& out, std::span<const Block> blocks);
std::vector<Block> read_blocks(std::istream& in);

}  // namespace grapher
