#include "grapher/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "grapher/common.hpp"
#include "grapher/rng.hpp"

namespace fs = std::filesystem;

namespace grapher {

std::string_view to_string(PipelineMode m) {
  switch (m) {
    case PipelineMode::full: return "full";
    case PipelineMode::structural_only: return "structural-only";
    case PipelineMode::attribute_only: return "attribute-only";
  }
  return "full";
}

PipelineMode pipeline_mode_from_string(std::string_view s) {
  if (s == "full") return PipelineMode::full;
  if (s == "structural-only" || s == "S") return PipelineMode::structural_only;
  if (s == "attribute-only" || s == "A") return PipelineMode::attribute_only;
  throw ConfigError("unknown mode '" + std::string(s) + "' (full | structural-only | attribute-only)");
}

PipelineConfig::PipelineConfig() {
  attribute.tokens.dim = 64;
  attribute.tokens.walks_per_node = 8;
  attribute.tokens.walk_length = 12;
  attribute.encoder.latent_dim = 32;
}

namespace {

std::size_t to_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" + std::string(v) + "'");
  return out;
}

double to_real(std::string_view key, std::string_view v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + std::string(key) + "' expects true/false, got '" + std::string(v) + "'");
}

std::vector<std::string> to_list(std::string_view v) {
  std::vector<std::string> out;
  for (auto& s : split(v, ','))
    if (!s.empty()) out.push_back(s);
  return out;
}

struct Setting {
  std::string key;
  std::string help;
  std::function<void(PipelineConfig&, std::string_view)> apply;
};

void add_train_settings(std::vector<Setting>& s, const std::string& prefix,
                        std::function<TrainConfig&(PipelineConfig&)> get) {
  s.push_back({prefix + ".dim", "embedding dimension",
               [get, k = prefix + ".dim"](PipelineConfig& c, std::string_view v) { get(c).dim = to_size(k, v); }});
  s.push_back({prefix + ".window", "skip-gram window",
               [get, k = prefix + ".window"](PipelineConfig& c, std::string_view v) { get(c).window = to_size(k, v); }});
  s.push_back({prefix + ".negatives", "negative samples per pair", [get, k = prefix + ".negatives"](
                                                                        PipelineConfig& c, std::string_view v) {
                 get(c).negatives = to_size(k, v);
               }});
  s.push_back({prefix + ".epochs", "training epochs",
               [get, k = prefix + ".epochs"](PipelineConfig& c, std::string_view v) { get(c).epochs = to_size(k, v); }});
  s.push_back({prefix + ".learning_rate", "initial step size (decays linearly)",
               [get, k = prefix + ".learning_rate"](PipelineConfig& c, std::string_view v) {
                 get(c).learning_rate = to_real(k, v);
               }});
  s.push_back({prefix + ".walks_per_node", "walks started per node",
               [get, k = prefix + ".walks_per_node"](PipelineConfig& c, std::string_view v) {
                 get(c).walks_per_node = to_size(k, v);
               }});
  s.push_back({prefix + ".walk_length", "maximum walk length",
               [get, k = prefix + ".walk_length"](PipelineConfig& c, std::string_view v) {
                 get(c).walk_length = to_size(k, v);
               }});
  s.push_back({prefix + ".neg_exponent", "unigram exponent of the negative distribution",
               [get, k = prefix + ".neg_exponent"](PipelineConfig& c, std::string_view v) {
                 get(c).neg_exponent = to_real(k, v);
               }});
}

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = [] {
    std::vector<Setting> s;
    s.push_back({"graph.nodes", "nodes JSON-lines file", [](PipelineConfig& c, std::string_view v) { c.nodes_path = v; }});
    s.push_back({"graph.edges", "edges JSON-lines file", [](PipelineConfig& c, std::string_view v) { c.edges_path = v; }});
    s.push_back({"rules", "rule file (JSON)", [](PipelineConfig& c, std::string_view v) { c.rules_path = v; }});
    s.push_back({"output", "output directory", [](PipelineConfig& c, std::string_view v) { c.output_dir = v; }});
    s.push_back({"mode", "full | structural-only | attribute-only",
                 [](PipelineConfig& c, std::string_view v) { c.mode = pipeline_mode_from_string(v); }});
    s.push_back({"seed", "master seed", [](PipelineConfig& c, std::string_view v) { c.seed = to_size("seed", v); }});
    s.push_back({"workers", "parallel workers (1 = deterministic)",
                 [](PipelineConfig& c, std::string_view v) { c.workers = to_size("workers", v); }});
    add_train_settings(s, "struct", [](PipelineConfig& c) -> TrainConfig& { return c.structural; });
    add_train_settings(s, "attr", [](PipelineConfig& c) -> TrainConfig& { return c.attribute.tokens; });
    s.push_back({"attr.latent_dim", "auto-encoder latent dimension", [](PipelineConfig& c, std::string_view v) {
                   c.attribute.encoder.latent_dim = to_size("attr.latent_dim", v);
                 }});
    s.push_back({"attr.hidden_dim", "auto-encoder hidden width (0 = automatic)", [](PipelineConfig& c, std::string_view v) {
                   c.attribute.encoder.hidden_dim = to_size("attr.hidden_dim", v);
                 }});
    s.push_back({"attr.ae_epochs", "auto-encoder epochs", [](PipelineConfig& c, std::string_view v) {
                   c.attribute.encoder.epochs = to_size("attr.ae_epochs", v);
                 }});
    s.push_back({"attr.ae_batch", "auto-encoder mini-batch size", [](PipelineConfig& c, std::string_view v) {
                   c.attribute.encoder.batch_size = to_size("attr.ae_batch", v);
                 }});
    s.push_back({"attr.ae_learning_rate", "auto-encoder Adam step size", [](PipelineConfig& c, std::string_view v) {
                   c.attribute.encoder.learning_rate = to_real("attr.ae_learning_rate", v);
                 }});
    s.push_back({"attr.sif_a", "SIF smoothing constant",
                 [](PipelineConfig& c, std::string_view v) { c.attribute.sif_a = to_real("attr.sif_a", v); }});
    s.push_back({"block.tables", "LSH tables L",
                 [](PipelineConfig& c, std::string_view v) { c.blocker.tables = to_size("block.tables", v); }});
    s.push_back({"block.bits", "LSH bits per table b",
                 [](PipelineConfig& c, std::string_view v) { c.blocker.bits = to_size("block.bits", v); }});
    s.push_back({"block.max_dist", "maximum cosine distance inside a block",
                 [](PipelineConfig& c, std::string_view v) { c.blocker.max_dist = to_real("block.max_dist", v); }});
    s.push_back({"block.cap", "maximum block size per space",
                 [](PipelineConfig& c, std::string_view v) { c.blocker.cap = to_size("block.cap", v); }});
    s.push_back({"block.labels", "query labels (comma list; default: labels of the rules' eid vars)",
                 [](PipelineConfig& c, std::string_view v) { c.blocker.labels = to_list(v); }});
    s.push_back({"prune.dice_threshold", "'learn' or a value in [0, 1]", [](PipelineConfig& c, std::string_view v) {
                   if (v == "learn") c.dice_threshold.reset();
                   else c.dice_threshold = to_real("prune.dice_threshold", v);
                 }});
    s.push_back({"prune.epsilon", "recall-loss budget for learning the dice threshold",
                 [](PipelineConfig& c, std::string_view v) { c.epsilon = to_real("prune.epsilon", v); }});
    s.push_back({"prune.validation_fraction", "share of eid-labelled nodes used to learn the dice threshold",
                 [](PipelineConfig& c, std::string_view v) {
                   c.validation_fraction = to_real("prune.validation_fraction", v);
                 }});
    s.push_back({"prune.grid_step", "dice threshold grid step", [](PipelineConfig& c, std::string_view v) {
                   double step = to_real("prune.grid_step", v);
                   if (!(step > 0 && step <= 1)) throw ConfigError("prune.grid_step must lie in (0, 1]");
                   c.dice_grid.clear();
                   for (int i = 0; i * step <= 1 + 1e-9; ++i) c.dice_grid.push_back(std::min(1.0, i * step));
                 }});
    s.push_back({"knn.k", "neighbours per node for the ablation matcher",
                 [](PipelineConfig& c, std::string_view v) { c.knn_k = to_size("knn.k", v); }});
    s.push_back({"discover", "discover rules from the (eid-labelled) input graph first",
                 [](PipelineConfig& c, std::string_view v) { c.discover = to_bool("discover", v); }});
    s.push_back({"discover.patterns", "pattern files (comma list); mining is skipped when given",
                 [](PipelineConfig& c, std::string_view v) { c.discovery.pattern_files = to_list(v); }});
    s.push_back({"discover.pattern_support", "minimum match count of mined patterns",
                 [](PipelineConfig& c, std::string_view v) {
                   c.discovery.pattern_support = to_size("discover.pattern_support", v);
                 }});
    s.push_back({"discover.max_edges", "maximum edges of mined patterns", [](PipelineConfig& c, std::string_view v) {
                   c.discovery.max_edges = to_size("discover.max_edges", v);
                 }});
    s.push_back({"discover.min_support", "minimum rule support", [](PipelineConfig& c, std::string_view v) {
                   c.discovery.min_support = to_size("discover.min_support", v);
                 }});
    s.push_back({"discover.max_lhs", "maximum LHS size (0 = unbounded)", [](PipelineConfig& c, std::string_view v) {
                   c.discovery.max_lhs = to_size("discover.max_lhs", v);
                 }});
    s.push_back({"discover.top_n", "rules kept after ranking",
                 [](PipelineConfig& c, std::string_view v) { c.discovery.top_n = to_size("discover.top_n", v); }});
    s.push_back({"discover.attributes", "attributes considered (comma list; default: all of the eid-var label)",
                 [](PipelineConfig& c, std::string_view v) { c.discovery.attributes = to_list(v); }});
    s.push_back({"discover.relations", "edge labels tried as exact relation constraints",
                 [](PipelineConfig& c, std::string_view v) { c.discovery.relations = to_list(v); }});
    s.push_back({"discover.grid", "threshold grid for string distances (comma list)",
                 [](PipelineConfig& c, std::string_view v) {
                   c.discovery.grid.clear();
                   for (const auto& x : to_list(v)) c.discovery.grid.push_back(to_real("discover.grid", x));
                 }});
    return s;
  }();
  return table;
}

}  // namespace

void PipelineConfig::set(std::string_view key, std::string_view value) {
  for (const auto& s : settings())
    if (s.key == key) {
      s.apply(*this, trim(value));
      return;
    }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> pipeline_config_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : settings()) out.emplace_back(s.key, s.help);
  return out;
}

void PipelineConfig::propagate() {
  structural.seed = mix_seed(seed, 1);
  attribute.tokens.seed = mix_seed(seed, 2);
  attribute.encoder.seed = mix_seed(seed, 3);
  blocker.seed = mix_seed(seed, 4);
  structural.workers = attribute.tokens.workers = blocker.workers = workers;
}

void PipelineConfig::validate(std::size_t node_count) const {
  structural.validate();
  attribute.tokens.validate();
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (node_count >= 100) {
    if (mode != PipelineMode::attribute_only && structural.dim > node_count / 2)
      throw ConfigError("struct.dim " + std::to_string(structural.dim) + " exceeds |V|/2 = " +
                        std::to_string(node_count / 2));
  }
  if (attribute.encoder.latent_dim >= attribute.tokens.dim)
    throw ConfigError("attr.latent_dim must be smaller than attr.dim");
  if (blocker.max_dist < 0 || blocker.max_dist > 2) throw ConfigError("block.max_dist must lie in [0, 2]");
  if (blocker.cap < 1) throw ConfigError("block.cap must be >= 1");
  if (dice_threshold && (*dice_threshold < 0 || *dice_threshold > 1))
    throw ConfigError("prune.dice_threshold must lie in [0, 1]");
  if (!(epsilon >= 0 && epsilon < 1)) throw ConfigError("prune.epsilon must lie in [0, 1)");
  if (!(validation_fraction > 0 && validation_fraction <= 1))
    throw ConfigError("prune.validation_fraction must lie in (0, 1]");
  if (knn_k < 1) throw ConfigError("knn.k must be >= 1");
}

PipelineConfig parse_pipeline_config(std::istream& in) {
  PipelineConfig cfg;
  for (const auto& kv : parse_key_values(in)) {
    try {
      cfg.set(kv.key, kv.value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(kv.line) + ": " + e.what());
    }
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_pipeline_config(in);
}

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
void run_stage(RunReport& r, const std::string& name, F&& f) {
  auto t0 = Clock::now();
  try {
    f();
  } catch (const Error& e) {
    throw Error(e.kind(), "stage " + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::stage, "stage " + name + ": " + e.what());
  }
  r.timings.push_back({name, std::chrono::duration<double>(Clock::now() - t0).count()});
}

std::vector<std::string> eid_labels(std::span<const Gdd> rules) {
  std::set<std::string> labels;
  for (const auto& r : rules) {
    labels.insert(r.scope.vars()[r.scope.require_var(r.eid_vars.first)].label);
    labels.insert(r.scope.vars()[r.scope.require_var(r.eid_vars.second)].label);
  }
  labels.erase(std::string(kWildcard));
  return {labels.begin(), labels.end()};
}

// Labelled block-graph edges touching the validation slice.
std::vector<LabelledPair> validation_sample(const PropertyGraph& g, const BlockGraph& bg, double fraction,
                                            std::uint64_t seed) {
  std::vector<NodeIndex> labelled;
  for (NodeIndex i = 0; i < g.node_count(); ++i)
    if (g.node(i).eid) labelled.push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(labelled.begin(), labelled.end(), rng);
  labelled.resize(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(labelled.size()))));
  std::set<std::string> slice;
  for (auto i : labelled) slice.insert(g.node(i).id);
  std::vector<LabelledPair> out;
  for (const auto& e : bg.edges) {
    if (!slice.count(e.pair.first) && !slice.count(e.pair.second)) continue;
    const auto& a = g.node(e.pair.first);
    const auto& b = g.node(e.pair.second);
    if (!a.eid || !b.eid) continue;
    out.push_back({e.dice, a.label == b.label && *a.eid == *b.eid});
  }
  return out;
}

}  // namespace

PipelineConfig prepared_config(const PipelineConfig& input, std::span<const Gdd> rules) {
  PipelineConfig cfg = input;
  cfg.propagate();
  if (cfg.blocker.labels.empty()) cfg.blocker.labels = eid_labels(rules);
  return cfg;
}

void block_stage(const PropertyGraph& g, const PipelineConfig& input, RunReport& r) {
  const auto cfg = prepared_config(input, r.ranked_rules);
  r.blocks = generate_blocks(cfg.mode == PipelineMode::attribute_only ? nullptr : &r.structural,
                             cfg.mode == PipelineMode::structural_only ? nullptr : &r.attribute, g, cfg.blocker);
  r.cb = candidate_pair_count(r.blocks);
}

void prune_stage(const PropertyGraph& g, const PipelineConfig& cfg, RunReport& r) {
  r.cb = candidate_pair_count(r.blocks);
  r.block_graph = build_block_graph(r.blocks);
  compute_weights(r.block_graph);
  compute_dice(r.block_graph, g);
  r.avw = average_weight(r.block_graph);
  if (cfg.dice_threshold) {
    r.theta = *cfg.dice_threshold;
  } else {
    auto sample = validation_sample(g, r.block_graph, cfg.validation_fraction, mix_seed(cfg.seed, 5));
    r.validation_pairs = sample.size();
    r.theta = learn_dice_threshold(sample, cfg.dice_grid, cfg.epsilon);
    r.theta_learned = true;
  }
  r.after_weight = prune_by_weight(r.block_graph, r.avw);
  r.after_dice = prune_by_dice(r.after_weight, r.theta);
  r.cp = r.after_dice.edges.size();
}

void match_stage(const PropertyGraph& g, const PipelineConfig& cfg, std::span<const NodePair> candidates,
                 RunReport& r) {
  if (cfg.mode == PipelineMode::full) {
    r.linked = link_entities(candidates, r.ranked_rules, g, cfg.workers);
  } else {
    const auto& emb = cfg.mode == PipelineMode::structural_only ? r.structural : r.attribute;
    auto knn = knn_match(emb, cfg.knn_k, g);
    std::set<NodePair> near(knn.begin(), knn.end());
    r.linked = {};
    for (const auto& c : candidates)
      if (near.count(c)) r.linked.pairs.push_back(c);
    std::sort(r.linked.pairs.begin(), r.linked.pairs.end());
    r.linked.pairs.erase(std::unique(r.linked.pairs.begin(), r.linked.pairs.end()), r.linked.pairs.end());
    r.linked.clusters = connected_components(r.linked.pairs);
    r.linked.rules = r.ranked_rules;
  }
  r.cm = r.linked.pairs.size();
}

void evaluate_stage(const PropertyGraph& g, RunReport& r) {
  auto truth = ground_truth(g);
  if (!truth.pairs.empty()) r.metrics = pair_metrics(r.linked.pairs, truth);
  auto cp = r.after_dice.pairs();
  if (!cp.empty()) r.cssr = cssr_g(cp, g);
  if (!r.blocks.empty()) r.block_purity = purity(r.blocks, truth);
}

namespace {

RunReport run_pipeline_impl(const PropertyGraph& g, std::vector<Gdd> rules, const PipelineConfig& input,
                            const std::function<void(const std::string&, const RunReport&)>& after_stage) {
  if (input.mode == PipelineMode::full && rules.empty())
    throw ConfigError("full mode needs a nonempty rule set (give rules = <file> or discover = true)");
  RunReport r;
  r.mode = input.mode;
  r.nodes = g.node_count();
  r.edges = g.edge_count();
  r.rules = rules.size();
  r.ranked_rules = rank_rules(std::move(rules));
  const auto cfg = prepared_config(input, r.ranked_rules);
  cfg.validate(g.node_count());
  auto done = [&](const std::string& stage) {
    if (after_stage) after_stage(stage, r);
  };

  if (cfg.mode != PipelineMode::attribute_only) {
    run_stage(r, "embed-structural", [&] { r.structural = embed_structure(g, r.ranked_rules, cfg.structural); });
    done("embed-structural");
  }
  if (cfg.mode != PipelineMode::structural_only) {
    run_stage(r, "embed-attribute", [&] { r.attribute = embed_attributes(g, r.ranked_rules, cfg.attribute); });
    done("embed-attribute");
  }
  run_stage(r, "block", [&] { block_stage(g, cfg, r); });
  done("block");
  run_stage(r, "prune", [&] { prune_stage(g, cfg, r); });
  done("prune");
  run_stage(r, "match", [&] { match_stage(g, cfg, r.after_dice.pairs(), r); });
  done("match");
  if (has_eids(g)) {
    run_stage(r, "evaluate", [&] { evaluate_stage(g, r); });
    done("evaluate");
  }
  return r;
}

}  // namespace

RunReport run_pipeline(const PropertyGraph& g, std::vector<Gdd> rules, const PipelineConfig& cfg) {
  return run_pipeline_impl(g, std::move(rules), cfg, {});
}

nlohmann::ordered_json report_to_json(const RunReport& r, bool with_timings) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(r.mode));
  j["ablation"] = r.mode != PipelineMode::full;
  j["matcher"] = r.mode == PipelineMode::full ? "gdd" : "cosine-knn";
  j["counts"] = {{"nodes", r.nodes},
                 {"edges", r.edges},
                 {"rules", r.rules},
                 {"structural_vectors", r.structural.size()},
                 {"attribute_vectors", r.attribute.size()},
                 {"blocks", r.blocks.size()},
                 {"C_b", r.cb},
                 {"block_graph_edges", r.block_graph.edges.size()},
                 {"after_weight", r.after_weight.edges.size()},
                 {"C_p", r.cp},
                 {"C_m", r.cm},
                 {"clusters", r.linked.clusters.size()}};
  j["avW"] = r.avw;
  j["dice_threshold"] = {{"value", r.theta}, {"learned", r.theta_learned}, {"validation_pairs", r.validation_pairs}};
  if (r.metrics) j["metrics"] = metrics_to_json(*r.metrics);
  if (r.cssr) j["cssr_g"] = *r.cssr;
  if (r.block_purity) j["purity"] = *r.block_purity;
  if (with_timings) {
    nlohmann::ordered_json t = nlohmann::ordered_json::object();
    for (const auto& s : r.timings) t[s.stage] = s.seconds;
    j["timings_seconds"] = t;
  }
  return j;
}

// ---------------------------------------------------------------------------

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr))
    throw Error(ErrorKind::stage, "SHA-256 computation failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return out.str();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

void write_pairs_csv(std::ostream& out, std::span<const NodePair> pairs) {
  std::vector<std::string> row{"v", "v'"};
  write_csv_row(out, row);
  for (const auto& p : pairs) {
    row = {p.first, p.second};
    write_csv_row(out, row);
  }
}

std::vector<NodePair> read_pairs_csv(std::istream& in) {
  auto t = parse_csv(in);
  if (t.header.size() < 2) throw DataError("pair file needs two columns");
  std::vector<NodePair> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i].size() < 2) throw DataError("pair file row " + std::to_string(i + 2) + " has fewer than two fields");
    out.emplace_back(t.rows[i][0], t.rows[i][1]);
  }
  return out;
}

std::vector<NodePair> load_pairs_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  return read_pairs_csv(in);
}

void write_clusters(std::ostream& out, const std::vector<std::vector<std::string>>& clusters) {
  for (const auto& c : clusters) {
    for (std::size_t i = 0; i < c.size(); ++i) out << (i ? "," : "") << c[i];
    out << '\n';
  }
}

namespace {

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::string dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) fs::create_directories(dir_);
  }
  bool enabled() const { return !dir_.empty(); }

  template <typename F>
  void write(const std::string& name, F&& body, bool hashed = true) {
    if (!enabled()) return;
    std::ofstream out(fs::path(dir_) / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (fs::path(dir_) / name).string());
    body(out);
    out.close();
    if (hashed) files_.push_back(name);
  }

  void manifest(const std::string& status) {
    if (!enabled()) return;
    std::ofstream out(fs::path(dir_) / "MANIFEST", std::ios::binary);
    out << "status: " << status << '\n';
    for (const auto& f : files_) out << sha256_file((fs::path(dir_) / f).string()) << "  " << f << '\n';
  }

 private:
  std::string dir_;
  std::vector<std::string> files_;
};

void write_stage_artifacts(ArtifactWriter& w, const std::string& stage, const RunReport& r, const PropertyGraph& g) {
  if (stage == "embed-structural" && !r.structural.empty())
    w.write("embeddings_structural.txt", [&](std::ostream& o) { write_embeddings_text(r.structural, o); });
  if (stage == "embed-attribute" && !r.attribute.empty())
    w.write("embeddings_attribute.txt", [&](std::ostream& o) { write_embeddings_text(r.attribute, o); });
  if (stage == "block") w.write("blocks.tsv", [&](std::ostream& o) { write_blocks(o, r.blocks); });
  if (stage == "prune") {
    w.write("pruned_pairs.csv",
            [&](std::ostream& o) { write_pruned_pairs_csv(o, r.block_graph, r.after_weight, r.after_dice); });
    w.write("candidates.csv", [&](std::ostream& o) { write_pairs_csv(o, r.after_dice.pairs()); });
  }
  if (stage == "match") {
    if (r.mode == PipelineMode::full)
      w.write("matches.jsonl", [&](std::ostream& o) {
        for (const auto& d : r.linked.decisions) o << decision_to_json(d, r.linked.rules, g).dump() << '\n';
      });
    w.write("linked_pairs.csv", [&](std::ostream& o) { write_pairs_csv(o, r.linked.pairs); });
    w.write("clusters.txt", [&](std::ostream& o) { write_clusters(o, r.linked.clusters); });
  }
  if (stage == "evaluate")
    w.write("metrics.json", [&](std::ostream& o) { o << report_to_json(r, false).dump(2) << '\n'; });
}

}  // namespace

RunReport run_pipeline(const PipelineConfig& cfg) {
  ArtifactWriter writer(cfg.output_dir);
  RunReport partial;
  std::string current = "load";
  try {
    PropertyGraph g;
    std::vector<Gdd> rules;
    run_stage(partial, "load", [&] {
      if (cfg.nodes_path.empty() || cfg.edges_path.empty())
        throw ConfigError("graph.nodes and graph.edges are required");
      g = load_graph_files(cfg.nodes_path, cfg.edges_path);
      if (!cfg.rules_path.empty()) rules = load_rules_file(cfg.rules_path);
    });
    if (cfg.discover) {
      current = "discover";
      run_stage(partial, "discover", [&] {
        auto found = discover_cmd(g, cfg.discovery);
        rules.insert(rules.end(), found.rules.begin(), found.rules.end());
      });
    }
    writer.write("rules.json", [&](std::ostream& o) {
      auto ranked = rank_rules(rules);
      write_rules(o, ranked);
    });
    auto pre = partial.timings;
    auto report = run_pipeline_impl(g, std::move(rules), cfg, [&](const std::string& stage, const RunReport& r) {
      current = stage;
      write_stage_artifacts(writer, stage, r, g);
    });
    report.timings.insert(report.timings.begin(), pre.begin(), pre.end());
    writer.write("report.json", [&](std::ostream& o) { o << report_to_json(report, true).dump(2) << '\n'; }, false);
    writer.manifest("complete");
    return report;
  } catch (const std::exception& e) {
    try {
      writer.manifest(std::string("incomplete (") + e.what() + ")");
    } catch (...) {
    }
    throw;
  }
}

// ---------------------------------------------------------------------------

DiscoverResult discover_cmd(const PropertyGraph& g, const DiscoverOptions& opts) {
  if (!has_eids(g))
    throw DataError("discovery needs an eid-labelled graph: no node carries an eid");
  std::set<std::string> labelled;
  for (const auto& n : g.nodes())
    if (n.eid) labelled.insert(n.label);

  std::vector<GraphPattern> scopes;
  if (!opts.pattern_files.empty()) {
    for (const auto& f : opts.pattern_files) scopes.push_back(load_pattern_file(f));
  } else {
    scopes = mine_frequent_patterns(g, opts.pattern_support, opts.max_edges);
  }

  DiscoverResult res;
  std::vector<Gdd> all;
  for (const auto& scope : scopes) {
    std::optional<std::pair<std::size_t, std::size_t>> pair;
    for (std::size_t i = 0; i < scope.size() && !pair; ++i)
      for (std::size_t j = i + 1; j < scope.size() && !pair; ++j)
        if (scope.vars()[i].label == scope.vars()[j].label && labelled.count(scope.vars()[i].label)) pair = {i, j};
    if (!pair) continue;
    const std::size_t fixed[] = {pair->first, pair->second};
    if (folds_onto_subpattern(scope, fixed)) continue;
    const auto& label = scope.vars()[pair->first].label;
    std::vector<std::string> attrs = opts.attributes;
    if (attrs.empty()) {
      std::set<std::string> names;
      for (const auto& n : g.nodes())
        if (n.label == label)
          for (const auto& a : n.attrs) names.insert(a.name);
      attrs.assign(names.begin(), names.end());
    }
    if (attrs.empty() && opts.relations.empty()) continue;
    DiscoveryConfig dc;
    dc.eid_vars = {scope.vars()[pair->first].name, scope.vars()[pair->second].name};
    for (const auto& a : attrs) dc.attributes.push_back({a, DistanceKind::normalized_edit, opts.grid, {}});
    dc.relations = opts.relations;
    dc.max_lhs = opts.max_lhs;
    auto matches = match_pattern(g, scope);
    // a node paired with itself says nothing about linking
    std::erase_if(matches.rows, [&](const Assignment& h) { return h[pair->first] == h[pair->second]; });
    auto pr = to_pseudo_relation(g, matches, attrs, opts.relations);
    auto found = discover_gdds(pr, scope, dc, opts.min_support);
    all.insert(all.end(), found.begin(), found.end());
  }
  res.rules = rank_rules(std::move(all));
  if (res.rules.size() > opts.top_n) res.rules.erase(res.rules.begin() + static_cast<std::ptrdiff_t>(opts.top_n), res.rules.end());
  if (res.rules.empty()) res.warnings.push_back("no rule reached min_support " + std::to_string(opts.min_support));
  return res;
}

PropertyGraph convert_cmd(const std::string& dir, const std::string& schema_path, const std::string& out_dir) {
  std::ifstream schema_in(schema_path);
  if (!schema_in) throw ConfigError("cannot open schema config " + schema_path);
  auto schema = parse_schema_config(schema_in);
  std::map<std::string, CsvTable> tables;
  if (!fs::is_directory(dir)) throw NotFoundError("no such input directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    try {
      tables[f.stem().string()] = parse_csv(in);
    } catch (const Error& e) {
      throw Error(e.kind(), f.filename().string() + ": " + e.what());
    }
  }
  for (const auto& t : schema.tables)
    if (!tables.count(t.table)) throw DataError("table '" + t.table + "' has no file " + t.table + ".csv in " + dir);
  auto g = convert_relational(tables, schema);
  fs::create_directories(out_dir);
  std::ofstream nodes(fs::path(out_dir) / "nodes.jsonl", std::ios::binary);
  std::ofstream edges(fs::path(out_dir) / "edges.jsonl", std::ios::binary);
  write_nodes_jsonl(g, nodes);
  write_edges_jsonl(g, edges);
  return g;
}

}  // namespace grapher
