#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "grapher/embedding.hpp"
#include "grapher/gdd.hpp"
#include "grapher/graph.hpp"
#include "grapher/pattern.hpp"

namespace grapher {

struct TrainConfig {
  std::size_t dim = 128;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 20;
  double neg_exponent = 0.75;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  void validate() const;
};

// L1 … Lt … L1 over node labels, with the edge label of each step.
struct MetaPathScheme {
  std::vector<std::string> labels;
  std::vector<std::string> edge_labels;  // labels.size() - 1 entries

  std::string text() const;  // labels joined by '-'
  bool operator==(const MetaPathScheme&) const = default;
};

std::vector<MetaPathScheme> metapath_schemes(const GraphPattern& scope);
// Union over all rules of the paths linking each rule's eid vars, deduplicated by label sequence.
std::vector<MetaPathScheme> metapath_schemes(std::span<const Gdd> rules);

// Token sequences for skip-gram. Each token belongs to a class that selects its negative pool
// (node label for graph walks, entity/token/attribute for tripartite walks).
struct WalkCorpus {
  std::vector<std::string> vocab;
  std::vector<std::uint32_t> token_class;
  std::vector<std::string> classes;
  std::vector<char> center;  // whether a token may act as a centre word
  std::vector<std::vector<std::uint32_t>> sequences;
  std::vector<std::uint32_t> provenance;  // scheme index per sequence

  std::uint32_t intern(std::string_view token, std::string_view cls, bool can_center = true);
  std::size_t token_count() const;

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::unordered_map<std::string, std::uint32_t> class_ids_;
};

// Scheme-guided first-order walks in both edge directions; tokens are node ids,
// classes are node labels.
WalkCorpus random_walks(const PropertyGraph& g, std::span<const MetaPathScheme> schemes, const TrainConfig& cfg);

struct SgnsSample {
  std::uint32_t center;
  std::uint32_t context;
  std::vector<std::uint32_t> negatives;
};

// Skip-gram with negative sampling, trained by SGD with linearly decaying step size.
class SkipGram {
 public:
  SkipGram(const WalkCorpus& corpus, const TrainConfig& cfg);

  void train_epoch();
  std::size_t epochs_done() const { return epochs_done_; }

  // Mean of log σ(C(u)·F(v)) + Σ log σ(−C(w)·F(v)) over the samples.
  double objective(std::span<const SgnsSample> samples) const;
  std::vector<SgnsSample> sample_pairs(std::size_t n, std::uint64_t seed) const;

  // Centre vectors of centre-eligible tokens, keys in natural order.
  EmbeddingTable embeddings() const;

 private:
  struct Pool {
    std::vector<std::uint32_t> tokens;
    std::vector<double> cumulative;
  };
  template <typename Rng>
  std::uint32_t draw_negative(std::uint32_t context, Rng& rng) const;
  void train_range(std::size_t begin, std::size_t end, std::uint64_t seed, std::size_t processed_before);

  const WalkCorpus& corpus_;
  TrainConfig cfg_;
  std::vector<double> in_;
  std::vector<double> out_;
  std::vector<Pool> pools_;
  std::size_t epochs_done_ = 0;
  std::size_t tokens_per_epoch_ = 0;
};

EmbeddingTable train_skipgram(const WalkCorpus& corpus, const TrainConfig& cfg);

// Schemes from the rule scopes, walks, skip-gram.
EmbeddingTable embed_structure(const PropertyGraph& g, std::span<const Gdd> rules, const TrainConfig& cfg);

}  // namespace grapher
