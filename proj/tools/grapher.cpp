// grapher: entity resolution over property graphs.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grapher/pipeline.hpp"

namespace fs = std::filesystem;
using namespace grapher;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::size_t workers = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value configuration file");
  app->add_option("--set", c.sets, "override one setting, KEY=VALUE (repeatable)");
  app->add_option("--workers", c.workers, "parallel workers; 1 gives deterministic output");
  app->add_option("--seed", c.seed, "master seed")->each([&c](const std::string&) { c.seed_given = true; });
}

PipelineConfig build_config(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig() : load_pipeline_config(c.config);
  for (const auto& kv : c.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    cfg.set(trim(std::string_view(kv).substr(0, eq)), trim(std::string_view(kv).substr(eq + 1)));
  }
  if (c.workers) cfg.workers = c.workers;
  if (c.seed_given) cfg.seed = c.seed;
  return cfg;
}

std::ofstream open_out(const std::string& path) {
  auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

PropertyGraph load_input_graph(const PipelineConfig& cfg) {
  if (cfg.nodes_path.empty() || cfg.edges_path.empty())
    throw ConfigError("graph.nodes and graph.edges are required (--nodes/--edges or config)");
  return load_graph_files(cfg.nodes_path, cfg.edges_path);
}

std::vector<Gdd> load_input_rules(const PipelineConfig& cfg, bool required) {
  if (cfg.rules_path.empty()) {
    if (required) throw ConfigError("a rule file is required (--rules or rules = ...)");
    return {};
  }
  return load_rules_file(cfg.rules_path);
}

std::string fmt(std::optional<double> v) { return v ? format_double(*v) : "-"; }

void print_table(std::ostream& out, const RunReport& r) {
  auto row = [&](const std::string& k, const std::string& v) {
    out << "  " << k << std::string(k.size() < 18 ? 18 - k.size() : 1, ' ') << v << '\n';
  };
  row("mode", std::string(to_string(r.mode)));
  row("|C_b|", std::to_string(r.cb));
  row("|C_p|", std::to_string(r.cp));
  row("|C_m|", std::to_string(r.cm));
  row("avW", format_double(r.avw));
  row("dice threshold", format_double(r.theta) + (r.theta_learned ? " (learned)" : ""));
  if (r.metrics) {
    row("precision", format_double(r.metrics->precision));
    row("recall", format_double(r.metrics->recall));
    row("f1", format_double(r.metrics->f1));
  }
  row("cssr_g", fmt(r.cssr));
  row("purity", fmt(r.block_purity));
  for (const auto& t : r.timings) row("time " + t.stage, format_double(t.seconds) + " s");
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return 2;
    case ErrorKind::data:
    case ErrorKind::not_found: return 3;
    case ErrorKind::stage: return 4;
  }
  return 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grapher - entity resolution on property graphs with linking rules and graph embeddings"};
  app.require_subcommand(1);

  Common common;
  std::string nodes, edges, rules, output, input, schema, blocks_path, candidates_path, pairs_path, space;
  std::string structural_path, attribute_path, embeddings_path, mode;
  std::vector<std::string> patterns;
  bool list_keys = false;

  auto graph_opts = [&](CLI::App* sub) {
    sub->add_option("--nodes", nodes, "nodes JSON-lines file");
    sub->add_option("--edges", edges, "edges JSON-lines file");
  };

  auto* convert = app.add_subcommand("convert", "convert CSV tables to a property graph");
  convert->add_option("--input", input, "directory holding <table>.csv files")->required();
  convert->add_option("--schema", schema, "schema configuration")->required();
  convert->add_option("--output", output, "output directory")->required();

  auto* discover = app.add_subcommand("discover", "discover linking rules from an eid-labelled graph");
  graph_opts(discover);
  discover->add_option("--patterns", patterns, "pattern files; skips pattern mining");
  discover->add_option("--output", output, "rule file to write")->required();
  add_common(discover, common);

  auto* embed = app.add_subcommand("embed", "train structural or attribute embeddings");
  graph_opts(embed);
  embed->add_option("--rules", rules, "rule file");
  embed->add_option("--space", space, "structural | attribute")->required()->check(CLI::IsMember({"structural", "attribute"}));
  embed->add_option("--output", output, "embedding file (.bin for binary)")->required();
  add_common(embed, common);

  auto* block = app.add_subcommand("block", "LSH blocking over one or both embedding spaces");
  graph_opts(block);
  block->add_option("--rules", rules, "rule file (selects query labels)");
  block->add_option("--structural", structural_path, "structural embeddings");
  block->add_option("--attribute", attribute_path, "attribute embeddings");
  block->add_option("--output", output, "blocks file")->required();
  add_common(block, common);

  auto* prune = app.add_subcommand("prune", "weight and dice pruning of the block graph");
  graph_opts(prune);
  prune->add_option("--blocks", blocks_path, "blocks file")->required();
  prune->add_option("--output", output, "output directory (pruned_pairs.csv, candidates.csv)")->required();
  add_common(prune, common);

  auto* match = app.add_subcommand("match", "confirm candidate pairs with rules (or cosine kNN in ablation modes)");
  graph_opts(match);
  match->add_option("--rules", rules, "rule file");
  match->add_option("--candidates", candidates_path, "candidate pairs CSV")->required();
  match->add_option("--embeddings", embeddings_path, "embeddings for the kNN matcher (ablation modes)");
  match->add_option("--mode", mode, "full | structural-only | attribute-only");
  match->add_option("--output", output, "output directory (matches.jsonl, linked_pairs.csv, clusters.txt)")->required();
  add_common(match, common);

  auto* run = app.add_subcommand("run", "run the whole pipeline");
  graph_opts(run);
  run->add_option("--rules", rules, "rule file");
  run->add_option("--mode", mode, "full | structural-only | attribute-only");
  run->add_option("--output", output, "output directory");
  run->add_flag("--list-keys", list_keys, "print every configuration key and exit");
  add_common(run, common);

  auto* eval = app.add_subcommand("eval", "score linked pairs against the graph's eids");
  graph_opts(eval);
  eval->add_option("--pairs", pairs_path, "linked pairs CSV")->required();
  eval->add_option("--candidates", candidates_path, "candidate pairs CSV (for cssr_g)");
  eval->add_option("--blocks", blocks_path, "blocks file (for purity)");
  eval->add_option("--output", output, "metrics JSON file (default: stdout)");

  NoiseSpec noise;
  SyntheticSpec synth_spec;
  noise.label = "person";
  auto* synth = app.add_subcommand("synth", "generate a noisy duplicate benchmark");
  graph_opts(synth);
  synth->add_option("--label", noise.label, "label of the duplicated nodes");
  synth->add_option("--rate", noise.duplicate_rate, "fraction of nodes duplicated");
  synth->add_flag("--attribute-noise", noise.attribute_noise, "perturb duplicate attributes");
  synth->add_flag("--structural-noise", noise.structural_noise, "delete up to half of a duplicate's edges");
  synth->add_option("--persons", synth_spec.persons, "persons in the generated base graph");
  synth->add_option("--cities", synth_spec.cities, "cities in the generated base graph");
  synth->add_option("--companies", synth_spec.companies, "companies in the generated base graph");
  synth->add_option("--seed", noise.seed, "seed");
  synth->add_option("--output", output, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (convert->parsed()) {
      auto g = convert_cmd(input, schema, output);
      std::cout << "wrote " << g.node_count() << " nodes, " << g.edge_count() << " edges to " << output << '\n';
      return 0;
    }
    if (eval->parsed()) {
      auto g = load_graph_files(nodes, edges);
      RunReport r;
      r.linked.pairs = load_pairs_csv(pairs_path);
      r.cm = r.linked.pairs.size();
      if (!candidates_path.empty()) {
        auto c = load_pairs_csv(candidates_path);
        r.cp = c.size();
        if (!c.empty()) r.cssr = cssr_g(c, g);
      }
      if (!blocks_path.empty()) {
        std::ifstream in(blocks_path);
        if (!in) throw DataError("cannot open " + blocks_path);
        r.blocks = read_blocks(in);
        r.cb = candidate_pair_count(r.blocks);
      }
      auto truth = ground_truth(g);
      r.metrics = pair_metrics(r.linked.pairs, truth);
      if (!r.blocks.empty()) r.block_purity = purity(r.blocks, truth);
      nlohmann::ordered_json j = metrics_to_json(*r.metrics);
      j["cssr_g"] = r.cssr ? nlohmann::ordered_json(*r.cssr) : nlohmann::ordered_json(nullptr);
      j["purity"] = r.block_purity ? nlohmann::ordered_json(*r.block_purity) : nlohmann::ordered_json(nullptr);
      j["counts"] = {{"C_b", r.cb}, {"C_p", r.cp}, {"C_m", r.cm}};
      if (output.empty()) {
        std::cout << j.dump(2) << '\n';
      } else {
        open_out(output) << j.dump(2) << '\n';
        std::cout << "precision " << format_double(r.metrics->precision) << "  recall "
                  << format_double(r.metrics->recall) << "  f1 " << format_double(r.metrics->f1) << '\n';
      }
      return 0;
    }
    if (synth->parsed()) {
      PropertyGraph base;
      if (!nodes.empty() || !edges.empty()) {
        base = load_graph_files(nodes, edges);
      } else {
        synth_spec.seed = noise.seed;
        base = synthetic_people_graph(synth_spec);
      }
      auto noisy = generate_noisy(base, noise);
      fs::create_directories(output);
      auto no = open_out((fs::path(output) / "nodes.jsonl").string());
      write_nodes_jsonl(noisy.graph, no);
      auto eo = open_out((fs::path(output) / "edges.jsonl").string());
      write_edges_jsonl(noisy.graph, eo);
      std::vector<NodePair> truth(noisy.truth.pairs.begin(), noisy.truth.pairs.end());
      auto out = open_out((fs::path(output) / "truth.csv").string());
      write_pairs_csv(out, truth);
      std::cout << "wrote " << noisy.graph.node_count() << " nodes, " << noisy.graph.edge_count() << " edges, "
                << truth.size() << " true pairs to " << output << '\n';
      return 0;
    }

    auto cfg = build_config(common);
    if (!nodes.empty()) cfg.nodes_path = nodes;
    if (!edges.empty()) cfg.edges_path = edges;
    if (!rules.empty()) cfg.rules_path = rules;
    if (!mode.empty()) cfg.mode = pipeline_mode_from_string(mode);

    if (run->parsed()) {
      if (list_keys) {
        for (const auto& [k, help] : pipeline_config_keys()) std::cout << k << "  " << help << '\n';
        return 0;
      }
      if (!output.empty()) cfg.output_dir = output;
      auto r = run_pipeline(cfg);
      print_table(std::cout, r);
      return 0;
    }
    if (discover->parsed()) {
      auto g = load_input_graph(cfg);
      auto opts = cfg.discovery;
      if (!patterns.empty()) opts.pattern_files = patterns;
      auto res = discover_cmd(g, opts);
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
      auto out = open_out(output);
      write_rules(out, res.rules);
      std::cout << res.rules.size() << " rules written to " << output << '\n';
      return 0;
    }

    auto g = load_input_graph(cfg);
    cfg.propagate();
    if (embed->parsed()) {
      auto rs = load_input_rules(cfg, true);
      auto t = space == "structural" ? embed_structure(g, rs, cfg.structural) : embed_attributes(g, rs, cfg.attribute);
      auto parent = fs::path(output).parent_path();
      if (!parent.empty()) fs::create_directories(parent);
      save_embeddings(t, output);
      std::cout << t.size() << " vectors of dimension " << t.dim() << " written to " << output << '\n';
      return 0;
    }
    if (block->parsed()) {
      if (structural_path.empty() && attribute_path.empty())
        throw ConfigError("block needs --structural and/or --attribute embeddings");
      RunReport r;
      r.ranked_rules = rank_rules(load_input_rules(cfg, false));
      if (!structural_path.empty()) r.structural = load_embeddings(structural_path);
      if (!attribute_path.empty()) r.attribute = load_embeddings(attribute_path);
      cfg.mode = structural_path.empty()   ? PipelineMode::attribute_only
                 : attribute_path.empty() ? PipelineMode::structural_only
                                          : PipelineMode::full;
      block_stage(g, cfg, r);
      auto out = open_out(output);
      write_blocks(out, r.blocks);
      std::cout << r.blocks.size() << " blocks, |C_b| = " << r.cb << '\n';
      return 0;
    }
    if (prune->parsed()) {
      RunReport r;
      std::ifstream in(blocks_path);
      if (!in) throw DataError("cannot open " + blocks_path);
      r.blocks = read_blocks(in);
      prune_stage(g, cfg, r);
      fs::create_directories(output);
      auto pp = open_out((fs::path(output) / "pruned_pairs.csv").string());
      write_pruned_pairs_csv(pp, r.block_graph, r.after_weight, r.after_dice);
      auto cp = open_out((fs::path(output) / "candidates.csv").string());
      write_pairs_csv(cp, r.after_dice.pairs());
      std::cout << "avW " << format_double(r.avw) << ", dice threshold " << format_double(r.theta)
                << (r.theta_learned ? " (learned)" : "") << ", |C_p| = " << r.cp << '\n';
      return 0;
    }
    if (match->parsed()) {
      RunReport r;
      r.mode = cfg.mode;
      r.ranked_rules = rank_rules(load_input_rules(cfg, cfg.mode == PipelineMode::full));
      if (cfg.mode != PipelineMode::full) {
        if (embeddings_path.empty()) throw ConfigError("ablation modes need --embeddings for the kNN matcher");
        (cfg.mode == PipelineMode::structural_only ? r.structural : r.attribute) = load_embeddings(embeddings_path);
      }
      auto cands = load_pairs_csv(candidates_path);
      match_stage(g, cfg, cands, r);
      fs::create_directories(output);
      if (cfg.mode == PipelineMode::full) {
        auto mo = open_out((fs::path(output) / "matches.jsonl").string());
        for (const auto& d : r.linked.decisions) mo << decision_to_json(d, r.linked.rules, g).dump() << '\n';
      }
      auto lo = open_out((fs::path(output) / "linked_pairs.csv").string());
      write_pairs_csv(lo, r.linked.pairs);
      auto co = open_out((fs::path(output) / "clusters.txt").string());
      write_clusters(co, r.linked.clusters);
      std::cout << "|C_m| = " << r.cm << ", " << r.linked.clusters.size() << " clusters\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
