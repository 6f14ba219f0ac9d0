#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "grapher/embedding.hpp"
#include "grapher/gdd.hpp"
#include "grapher/graph.hpp"
#include "grapher/struct_embed.hpp"

namespace grapher {

// Case-folded tokens split on whitespace and punctuation.
std::vector<std::string> tokenize(std::string_view text);

// A_Σ: attribute names referenced by the rules' LHS constraints, sorted.
std::vector<std::string> rule_attributes(std::span<const Gdd> rules);

// Entities, tokens and attribute names; edges carry occurrence counts.
struct TripartiteGraph {
  using Adjacency = std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>>;  // (index, count)

  std::vector<std::string> entities;  // node ids
  std::vector<std::string> tokens;
  std::vector<std::string> attributes;
  Adjacency entity_tokens, token_entities, token_attrs, attr_tokens;
  std::vector<std::size_t> token_occurrences;

  std::optional<std::uint32_t> token_index(std::string_view t) const;

 private:
  friend TripartiteGraph build_tripartite(const PropertyGraph&, std::span<const std::string>);
  std::unordered_map<std::string, std::uint32_t> token_ids_;
};

// Over the given attributes, or all attributes when the list is empty.
TripartiteGraph build_tripartite(const PropertyGraph& g, std::span<const std::string> attributes);
TripartiteGraph build_tripartite(const PropertyGraph& g, std::span<const Gdd> rules);

inline constexpr std::string_view kEntityClass = "entity";
inline constexpr std::string_view kTokenClass = "token";
inline constexpr std::string_view kAttributeClass = "attribute";

// Walks cycling entity → token → attribute → token → entity …, with multiplicity-weighted
// steps; `walks_per_node` starts per entity. Only token positions are centres.
WalkCorpus tripartite_walks(const TripartiteGraph& tg, const TrainConfig& cfg);
EmbeddingTable token_embeddings(const TripartiteGraph& tg, const TrainConfig& cfg);

struct SifConfig {
  double a = 1e-3;
  std::unordered_map<std::string, double> frequency;  // p(w)
  std::vector<std::string> attributes;                // empty = all

  static SifConfig from_tripartite(const TripartiteGraph& tg);
};

// Σ_w a/(a+p(w))·F(w) / token count over the node's tokens. Tokens without an embedding use
// the vocabulary mean.
class SifAggregator {
 public:
  SifAggregator(const EmbeddingTable& tokens, SifConfig cfg);
  std::vector<double> operator()(const Node& node) const;
  std::size_t token_count(const Node& node) const;

 private:
  const EmbeddingTable& tokens_;
  SifConfig cfg_;
  std::vector<double> mean_;
};

std::vector<double> sif_aggregate(const Node& node, const EmbeddingTable& tokens, const SifConfig& cfg);

// input → hidden (ReLU) → latent (identity) → hidden (ReLU) → output (identity).
// All weights and biases live in one flat parameter vector.
class AutoEncoder {
 public:
  AutoEncoder(std::size_t input_dim, std::size_t latent_dim, std::uint64_t seed, std::size_t hidden_dim = 0);

  std::size_t input_dim() const { return n_; }
  std::size_t hidden_dim() const { return h_; }
  std::size_t latent_dim() const { return l_; }

  std::vector<double> encode(std::span<const double> x) const;
  std::vector<double> reconstruct(std::span<const double> x) const;

  // Mean over samples of ‖o − i‖².
  double loss(std::span<const std::vector<double>> batch) const;
  std::vector<double> gradient(std::span<const std::vector<double>> batch) const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  // "<input> <hidden> <latent>" then all parameters, one per line.
  void save(std::ostream& out) const;
  static AutoEncoder load(std::istream& in);

 private:
  struct Trace {
    std::vector<double> a1, z1, l, a3, z3, o;
  };
  void forward(std::span<const double> x, Trace& t) const;
  std::size_t n_, h_, l_;
  std::size_t w1_, b1_, w2_, b2_, w3_, b3_, w4_, b4_;
  std::vector<double> params_;
};

struct AutoEncoderConfig {
  std::size_t latent_dim = 32;
  std::size_t hidden_dim = 0;  // 0 = midway between input and latent
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
};

struct AutoEncoderResult {
  AutoEncoder model;
  EmbeddingTable latent;
  std::vector<double> loss_history;  // full-data loss after each epoch
};

// Adam on mini-batches. `keys` names the rows of the returned latent table.
AutoEncoderResult train_autoencoder(std::span<const std::string> keys, std::span<const std::vector<double>> vectors,
                                    const AutoEncoderConfig& cfg);

struct AttributeEmbeddingConfig {
  TrainConfig tokens;
  AutoEncoderConfig encoder;
  double sif_a = 1e-3;
};

// Token walks, SIF node vectors, auto-encoder latents. Nodes without any A_Σ token are left out.
EmbeddingTable embed_attributes(const PropertyGraph& g, std::span<const Gdd> rules,
                                const AttributeEmbeddingConfig& cfg);

}  // namespace grapher
