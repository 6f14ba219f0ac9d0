#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grapher/attr_embed.hpp"
#include "grapher/blocker.hpp"
#include "grapher/embedding.hpp"
#include "grapher/gdd.hpp"
#include "grapher/graph.hpp"
#include "grapher/matcher.hpp"
#include "grapher/metrics.hpp"
#include "grapher/pruner.hpp"
#include "grapher/struct_embed.hpp"

namespace grapher {

enum class PipelineMode { full, structural_only, attribute_only };

std::string_view to_string(PipelineMode m);
PipelineMode pipeline_mode_from_string(std::string_view s);

struct DiscoverOptions {
  std::vector<std::string> pattern_files;  // empty = mine scopes
  std::size_t pattern_support = 2;
  std::size_t max_edges = 2;
  std::size_t min_support = 2;
  std::size_t max_lhs = 4;
  std::size_t top_n = 10;
  std::vector<std::string> attributes;  // empty = every attribute of the eid-var label
  std::vector<std::string> relations;
  std::vector<double> grid = DiscoveryConfig::default_grid();
};

struct PipelineConfig {
  std::string nodes_path;
  std::string edges_path;
  std::string rules_path;
  std::string output_dir;
  PipelineMode mode = PipelineMode::full;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  TrainConfig structural;
  AttributeEmbeddingConfig attribute;
  BlockerParams blocker;
  std::optional<double> dice_threshold;  // nullopt = learn
  double epsilon = 0.01;
  double validation_fraction = 0.2;
  std::vector<double> dice_grid = default_dice_grid();
  std::size_t knn_k = 1;
  bool discover = false;
  DiscoverOptions discovery;

  PipelineConfig();
  // Applies one "key = value" setting; throws ConfigError on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  void validate(std::size_t node_count) const;
  // Copies seed and workers into the per-stage settings.
  void propagate();
};

PipelineConfig parse_pipeline_config(std::istream& in);
PipelineConfig load_pipeline_config(const std::string& path);
// Every recognised key with a one-line description.
std::vector<std::pair<std::string, std::string>> pipeline_config_keys();

struct StageTiming {
  std::string stage;
  double seconds = 0;
};

struct RunReport {
  PipelineMode mode = PipelineMode::full;
  std::size_t nodes = 0, edges = 0, rules = 0;
  std::vector<Gdd> ranked_rules;

  EmbeddingTable structural;
  EmbeddingTable attribute;
  std::vector<Block> blocks;
  BlockGraph block_graph, after_weight, after_dice;
  double avw = 0;
  double theta = 0;
  bool theta_learned = false;
  std::size_t validation_pairs = 0;

  std::size_t cb = 0;  // Σ per-block pairs
  std::size_t cp = 0;
  std::size_t cm = 0;
  LinkedEntityGraph linked;  // decisions only in full mode

  std::optional<PairMetrics> metrics;
  std::optional<double> cssr;
  std::optional<double> block_purity;
  std::vector<StageTiming> timings;
};

// Runs Alg. 1 on an in-memory graph. Stage failures are rethrown with the stage name prefixed.
RunReport run_pipeline(const PropertyGraph& g, std::vector<Gdd> rules, const PipelineConfig& cfg);
// Loads inputs from cfg paths, runs, and writes artifacts plus MANIFEST to cfg.output_dir
// (also on failure, marked incomplete).
RunReport run_pipeline(const PipelineConfig& cfg);

// The individual stages, for running the pipeline piecewise. Each reads the report fields
// filled by the stages before it and fills its own.
PipelineConfig prepared_config(const PipelineConfig& cfg, std::span<const Gdd> rules);
void block_stage(const PropertyGraph& g, const PipelineConfig& cfg, RunReport& r);
void prune_stage(const PropertyGraph& g, const PipelineConfig& cfg, RunReport& r);
void match_stage(const PropertyGraph& g, const PipelineConfig& cfg, std::span<const NodePair> candidates,
                 RunReport& r);
void evaluate_stage(const PropertyGraph& g, RunReport& r);

nlohmann::ordered_json report_to_json(const RunReport& r, bool with_timings);

struct DiscoverResult {
  std::vector<Gdd> rules;
  std::vector<std::string> warnings;
};

DiscoverResult discover_cmd(const PropertyGraph& g, const DiscoverOptions& opts);

// Reads every table named in the schema from `dir`/<table>.csv and writes nodes.jsonl and
// edges.jsonl into out_dir.
PropertyGraph convert_cmd(const std::string& dir, const std::string& schema_path, const std::string& out_dir);

// Two-column CSV with header "v,v'".
void write_pairs_csv(std::ostream& out, std::span<const NodePair> pairs);
std::vector<NodePair> read_pairs_csv(std::istream& in);
std::vector<NodePair> load_pairs_csv(const std::string& path);
// One comma-separated cluster per line.
void write_clusters(std::ostream& out, const std::vector<std::vector<std::string>>& clusters);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::string& path);

}  // namespace grapher
