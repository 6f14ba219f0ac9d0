// Acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "grapher/pipeline.hpp"
#include "oracles.hpp"

using namespace grapher;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int n, const std::string& name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::cout << "criterion " << std::setw(2) << n << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << name << ": "
            << o.detail << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x, int prec = 4) {
  std::ostringstream s;
  s << std::setprecision(prec) << x;
  return s.str();
}

PropertyGraph fig1() {
  return load_graph_files(oracle::data_path("fig1/nodes.jsonl"), oracle::data_path("fig1/edges.jsonl"));
}

std::vector<Gdd> example4() { return load_rules_file(oracle::data_path("fig1/rules_example4.json")); }

GraphPattern parse_pattern(const char* text) { return pattern_from_json(nlohmann::json::parse(text)); }

std::vector<Gdd> toy_rules_with_genre() {
  auto rules = example4();
  GraphPattern q4({{"x", "user"}, {"y", "video"}, {"z", "genre"}, {"y'", "video"}, {"x'", "user"}},
                  {{0, "watched", 1}, {1, "has", 2}, {3, "has", 2}, {4, "watched", 3}});
  rules.emplace_back(q4, std::vector<DistanceConstraint>{}, std::pair<std::string, std::string>{"x", "x'"});
  return rules;
}

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> N(0, 1);
  std::vector<double> v(d);
  for (auto& x : v) x = N(rng);
  return v;
}

std::vector<double> unit(std::vector<double> v) {
  const double n = norm(v);
  for (auto& x : v) x /= n;
  return v;
}

std::vector<double> at_distance(std::mt19937_64& rng, const std::vector<double>& u, double dist) {
  auto w = gaussian(rng, u.size());
  const double p = dot(w, u);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= p * u[i];
  w = unit(w);
  const double c = 1 - dist, s = std::sqrt(1 - c * c);
  std::vector<double> v(u.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = c * u[i] + s * w[i];
  return v;
}

void save_graph(const PropertyGraph& g, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream n(dir / "nodes.jsonl"), e(dir / "edges.jsonl");
  write_nodes_jsonl(g, n);
  write_edges_jsonl(g, e);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;

  criterion(1, "toy-graph pattern matches", [] {
    auto t0 = clock::now();
    auto g = fig1();
    using Rows = std::vector<std::vector<std::string>>;
    auto q1 = load_pattern_file(oracle::data_path("fig1/q1.json"));
    auto q2 = parse_pattern(R"({"vars": [{"name": "x", "label": "user"}, {"name": "y", "label": "ipaddress"},
                                          {"name": "z", "label": "video"}],
                                 "edges": [{"src": "x", "label": "uses", "dst": "y"},
                                           {"src": "x", "label": "watched", "dst": "z"}]})");
    auto q3 = load_pattern_file(oracle::data_path("fig1/q3.json"));
    auto q4 = parse_pattern(R"({"vars": [{"name": "x", "label": "user"}, {"name": "y", "label": "video"},
                                          {"name": "z", "label": "genre"}],
                                 "edges": [{"src": "x", "label": "watched", "dst": "y"},
                                           {"src": "y", "label": "has", "dst": "z"}]})");
    bool ok = match_pattern(g, q1).row_ids(g) == Rows{{"v0", "v9"}, {"v1", "v8"}} &&
              match_pattern(g, q2).row_ids(g) ==
                  Rows{{"v2", "v6", "v0"}, {"v3", "v7", "v1"}, {"v4", "v7", "v0"}, {"v5", "v6", "v1"}} &&
              match_pattern(g, q3).row_ids(g) == Rows{{"v2", "v5", "v6"},
                                                      {"v3", "v4", "v7"},
                                                      {"v3", "v10", "v7"},
                                                      {"v3", "v11", "v7"},
                                                      {"v4", "v10", "v7"},
                                                      {"v4", "v11", "v7"},
                                                      {"v10", "v11", "v7"}} &&
              match_pattern(g, q4).row_ids(g) ==
                  Rows{{"v2", "v0", "v9"}, {"v3", "v1", "v8"}, {"v4", "v0", "v9"}, {"v5", "v1", "v8"}};
    const double s = seconds_since(t0);
    return Outcome{ok && s < 1.0, std::string(ok ? "H1-H4 exact" : "row mismatch") + ", " + fmt(s, 3) + " s"};
  });

  criterion(2, "toy-graph end to end", [] {
    auto t0 = clock::now();
    auto cfg = load_pipeline_config(oracle::data_path("fig1/fig1.conf"));
    auto r = run_pipeline(fig1(), example4(), cfg);
    const double s = seconds_since(t0);
    const bool pairs = r.linked.pairs == std::vector<NodePair>{NodePair("v3", "v4"), NodePair("v10", "v11")};
    const double f1 = r.metrics ? r.metrics->f1 : 0;
    return Outcome{pairs && f1 == 1.0 && s < 10,
                   std::to_string(r.linked.pairs.size()) + " linked pairs, F1 " + fmt(f1) + ", " + fmt(s, 3) + " s"};
  });

  criterion(3, "matcher agrees with brute force", [] {
    std::size_t pairs = 0, agree = 0, linked = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      auto g = oracle::random_graph(seed, 50, 3);
      auto rules = oracle::random_rules(seed * 13 + 5, 3);
      for (const auto& a : g.nodes())
        for (const auto& b : g.nodes()) {
          if (!natural_less(a.id, b.id) || a.label != b.label) continue;
          const bool expect = oracle::brute_force_link(a.id, b.id, rules, g);
          const bool got = confirm_match(NodePair(a.id, b.id), rules, g).linked;
          ++pairs;
          agree += expect == got;
          linked += expect;
        }
    }
    return Outcome{pairs > 0 && agree == pairs, std::to_string(agree) + "/" + std::to_string(pairs) +
                                                    " pairs agree (" + std::to_string(linked) + " linked)"};
  });

  criterion(4, "discovery agrees with exhaustive enumeration", [] {
    const std::vector<double> thresholds{0, 0.15, 0.3, 0.45, 0.6, 0.8};
    const GraphPattern scope({{"x", "user"}, {"x'", "user"}}, {{0, "knows", 1}});
    std::size_t same = 0, emitted = 0, invalid = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      const std::size_t rows = 3 + seed % 6, attrs = 1 + seed % 4, grid = 2 + seed % 5;
      auto pr = oracle::random_pseudo_relation(seed, rows, attrs);
      DiscoveryConfig cfg;
      cfg.eid_vars = {"x", "x'"};
      std::vector<oracle::OracleSlot> slots;
      std::vector<double> g(thresholds.begin(), thresholds.begin() + static_cast<std::ptrdiff_t>(grid));
      for (std::size_t a = 0; a < attrs; ++a) {
        cfg.attributes.push_back({"a" + std::to_string(a), DistanceKind::normalized_edit, g, {}});
        slots.push_back({"a" + std::to_string(a), g});
      }
      auto rules = discover_gdds(pr, scope, cfg, 1);
      std::set<oracle::RuleKey> got;
      for (const auto& r : rules) got.insert(oracle::rule_key(r));
      same += got == oracle::discover_oracle(pr, "x", "x'", slots, 1, 0);

      const auto ex = *pr.column("x", "eid"), ex2 = *pr.column("x'", "eid");
      for (const auto& r : rules) {
        ++emitted;
        for (std::size_t i = 0; i < pr.rows.size(); ++i) {
          if (pr.rows[i][ex] == "*" || pr.rows[i][ex2] == "*") continue;
          if (satisfies_lhs(r, PseudoRowAccessor(pr, i)) && pr.rows[i][ex] != pr.rows[i][ex2]) {
            ++invalid;
            break;
          }
        }
      }
    }
    return Outcome{same == 50 && invalid == 0, std::to_string(same) + "/50 tables set-equal, " +
                                                   std::to_string(emitted) + " rules, " + std::to_string(invalid) +
                                                   " fail re-check"};
  });

  criterion(5, "gradient check and skip-gram objective", [] {
    std::mt19937_64 rng(21);
    double worst = 0;
    std::size_t kinks = 0, params_total = 0;
    for (int net = 0; net < 20; ++net) {
      const std::size_t n = 4 + rng() % 5, l = 1 + rng() % 3, h = l + 1 + rng() % 4;
      AutoEncoder ae(n, l, 100 + static_cast<std::uint64_t>(net), h);
      std::normal_distribution<double> N(0, 1);
      std::vector<std::vector<double>> batch(3, std::vector<double>(n));
      for (auto& x : batch)
        for (auto& v : x) v = N(rng);
      auto grad = ae.gradient(batch);
      auto params = ae.parameters();
      const double eps = 1e-6, base = ae.loss(batch);
      double diff = 0, scale = 0;
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + eps;
        const double up = ae.loss(batch);
        params[i] = keep - eps;
        const double down = ae.loss(batch);
        params[i] = keep;
        ++params_total;
        // the loss is not differentiable where a step crosses a ReLU kink
        const double right = (up - base) / eps, left = (base - down) / eps;
        if (std::abs(right - left) > 1e-3 * std::max(1.0, std::abs(right) + std::abs(left))) {
          ++kinks;
          continue;
        }
        const double fd = (up - down) / (2 * eps);
        diff += (fd - grad[i]) * (fd - grad[i]);
        scale += fd * fd + grad[i] * grad[i];
      }
      worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(scale), 1e-12));
    }

    auto g = fig1();
    TrainConfig cfg;
    cfg.dim = 16;
    cfg.epochs = 5;
    cfg.seed = 3;
    auto schemes = metapath_schemes(std::span<const Gdd>(toy_rules_with_genre()));
    auto corpus = random_walks(g, schemes, cfg);
    SkipGram sg(corpus, cfg);
    auto samples = sg.sample_pairs(2000, 99);
    std::vector<double> obj{sg.objective(samples)};
    for (int e = 0; e < 5; ++e) {
      sg.train_epoch();
      obj.push_back(sg.objective(samples));
    }
    bool rising = true;
    for (std::size_t i = 1; i < obj.size(); ++i) rising = rising && obj[i] > obj[i - 1];
    return Outcome{worst < 1e-4 && rising && kinks * 10 < params_total,
                   "max relative error " + fmt(worst, 3) + " (" + std::to_string(kinks) + " of " +
                       std::to_string(params_total) + " parameters at a kink), objective " + fmt(obj.front()) +
                       " -> " + fmt(obj.back()) + (rising ? " rising every epoch" : " NOT monotone")};
  });

  criterion(6, "walk validity and transition frequencies", [] {
    auto g = fig1();
    auto schemes = metapath_schemes(std::span<const Gdd>(toy_rules_with_genre()));
    TrainConfig cfg;
    cfg.walks_per_node = 1000;
    cfg.walk_length = 21;
    cfg.seed = 6;
    auto corpus = random_walks(g, schemes, cfg);
    std::size_t steps = 0, invalid = 0;
    // (from node, wanted label) -> next node -> count
    std::map<std::pair<std::string, std::string>, std::map<std::string, std::size_t>> trans;
    for (std::size_t s = 0; s < corpus.sequences.size(); ++s) {
      const auto& seq = corpus.sequences[s];
      const auto& scheme = schemes[corpus.provenance[s]];
      const std::size_t period = scheme.labels.size() - 1;
      for (std::size_t t = 1; t < seq.size(); ++t) {
        ++steps;
        const auto& prev = corpus.vocab[seq[t - 1]];
        const auto& cur = corpus.vocab[seq[t]];
        const auto& want = scheme.labels[t % period];
        auto nb = neighbors_by_label(g, prev, want);
        if (g.node(cur).label != want || std::find(nb.begin(), nb.end(), cur) == nb.end()) ++invalid;
        ++trans[{prev, want}][cur];
      }
    }
    std::size_t cells = 0, outside = 0;
    for (const auto& [key, next] : trans) {
      auto nb = neighbors_by_label(g, key.first, key.second);
      std::size_t total = 0;
      for (const auto& [id, c] : next) total += c;
      const double p = 1.0 / static_cast<double>(nb.size());
      const double se = std::sqrt(p * (1 - p) / static_cast<double>(total));
      for (const auto& id : nb) {
        ++cells;
        auto it = next.find(id);
        const double freq = it == next.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
        if (std::abs(freq - p) > 3 * se + 1e-12) ++outside;
      }
    }
    return Outcome{steps >= 100000 && invalid == 0 && outside == 0,
                   std::to_string(steps) + " steps, " + std::to_string(invalid) + " invalid, " +
                       std::to_string(outside) + " of " + std::to_string(cells) + " transition cells outside 3 SE"};
  });

  criterion(7, "LSH recall and collision rate", [] {
    std::mt19937_64 rng(17);
    const std::size_t d = 32;
    EmbeddingTable t(d);
    std::vector<std::vector<double>> kept;
    std::vector<std::pair<std::string, std::string>> truth;
    std::uniform_real_distribution<double> small(1e-4, 0.1);
    while (kept.size() < 500) {
      auto u = unit(gaussian(rng, d));
      bool ok = true;
      for (const auto& k : kept) ok = ok && cosine_distance(u, k) >= 0.6;
      if (!ok) continue;
      kept.push_back(u);
      const auto id = std::to_string(kept.size());
      t.set("b" + id, u);
      t.set("d" + id, at_distance(rng, u, small(rng)));
      truth.emplace_back("b" + id, "d" + id);
    }
    PropertyGraph g;
    for (const auto& k : t.keys()) g.add_node({k, "x", std::nullopt, {}});
    BlockerParams params;
    params.seed = 4;
    auto blocks = generate_blocks(&t, nullptr, g, params);
    std::set<std::pair<std::string, std::string>> together;
    for (const auto& b : blocks)
      for (const auto& x : b.members)
        for (const auto& y : b.members) together.insert({x, y});
    // oracle: exhaustive scan of every planted pair
    std::size_t found = 0;
    for (const auto& p : truth) found += together.count(p);
    const double recall = static_cast<double>(found) / static_cast<double>(truth.size());

    EmbeddingTable probes(16);
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
    for (std::size_t i = 0; i < 1000; ++i) {
      auto u = unit(gaussian(rng, 16));
      pairs.emplace_back(u, at_distance(rng, u, 0.5));  // 60 degrees
      probes.set("p" + std::to_string(i), u);
    }
    LshIndex index(probes, 16, 12, 9);
    std::size_t hits = 0;
    for (const auto& [u, v] : pairs)
      for (std::size_t tb = 0; tb < 16; ++tb) hits += index.bucket_key(tb, u) == index.bucket_key(tb, v);
    const double p = std::pow(1 - 60.0 / 180.0, 12.0), n = 16000;
    const double sigma = std::sqrt(n * p * (1 - p));
    const bool rate_ok = std::abs(static_cast<double>(hits) - n * p) <= 3 * sigma;
    return Outcome{recall >= 0.95 && rate_ok, "recall " + fmt(recall) + " (" + std::to_string(found) + "/500), " +
                                                  std::to_string(hits) + " collisions vs " + fmt(n * p) +
                                                  " expected, sigma " + fmt(sigma, 3)};
  });

  // Synthetic fixtures shared by criteria 8 to 11.
  auto work = fs::temp_directory_path() / ("grapher_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work);
  const auto base = synthetic_people_graph({1500, 100, 400, 7});
  const auto wa = generate_noisy(base, {"person", 0.1, true, false, 7});
  const auto ws = generate_noisy(base, {"person", 0.1, false, true, 7});
  save_graph(wa.graph, work / "wa");
  auto cfg = load_pipeline_config(oracle::data_path("synthetic.conf"));
  cfg.nodes_path = (work / "wa" / "nodes.jsonl").string();
  cfg.edges_path = (work / "wa" / "edges.jsonl").string();
  cfg.output_dir = (work / "run1").string();
  std::optional<RunReport> wa_run;
  std::string wa_error;
  try {
    wa_run = run_pipeline(cfg);
  } catch (const std::exception& e) {
    wa_error = e.what();
  }
  auto need_wa = [&] {
    if (!wa_run) throw std::runtime_error("synthetic run failed: " + wa_error);
    return *wa_run;
  };

  criterion(8, "pruning sweep monotone in the dice threshold", [&] {
    const auto& r = need_wa();
    std::size_t prev_count = std::numeric_limits<std::size_t>::max();
    double prev_recall = 2;
    bool mono = true;
    std::ostringstream trace;
    for (double theta : default_dice_grid()) {
      auto kept = prune_by_dice(r.after_weight, theta);
      std::size_t tp = 0;
      for (const auto& e : kept.edges) tp += wa.truth.contains(e.pair);
      const double recall = static_cast<double>(tp) / static_cast<double>(wa.truth.pairs.size());
      const double pur = kept.edges.empty() ? 1.0 : static_cast<double>(tp) / static_cast<double>(kept.edges.size());
      mono = mono && kept.edges.size() <= prev_count && recall <= prev_recall;
      prev_count = kept.edges.size();
      prev_recall = recall;
      if (theta == 0.0 || theta == 0.5 || theta == 0.8 || theta == 1.0)
        trace << " theta " << theta << ": |C_p| " << kept.edges.size() << ", recall " << fmt(recall, 3)
              << ", purity " << fmt(pur, 3) << ';';
    }
    return Outcome{mono, std::string(mono ? "non-increasing;" : "NOT monotone;") + trace.str()};
  });

  double wa_f1 = 0;
  criterion(9, "synthetic duplicates with discovered rules", [&] {
    const auto& r = need_wa();
    wa_f1 = r.metrics->f1;
    auto ws_rules = discover_cmd(ws.graph, cfg.discovery).rules;
    auto ws_cfg = cfg;
    ws_cfg.output_dir.clear();
    auto ws_run = run_pipeline(ws.graph, ws_rules, ws_cfg);
    const double ws_f1 = ws_run.metrics->f1;
    return Outcome{wa_f1 >= 0.9 && wa_f1 >= ws_f1,
                   std::to_string(wa.graph.node_count()) + " nodes, " + std::to_string(r.ranked_rules.size()) +
                       " rules; attribute-noise F1 " + fmt(wa_f1) + ", structural-noise F1 " + fmt(ws_f1)};
  });

  criterion(10, "full pipeline beats both ablations", [&] {
    const auto& r = need_wa();
    auto s_cfg = cfg, a_cfg = cfg;
    s_cfg.mode = PipelineMode::structural_only;
    a_cfg.mode = PipelineMode::attribute_only;
    const double s = run_pipeline(wa.graph, r.ranked_rules, s_cfg).metrics->f1;
    const double a = run_pipeline(wa.graph, r.ranked_rules, a_cfg).metrics->f1;
    return Outcome{r.metrics->f1 > std::max(s, a),
                   "full " + fmt(r.metrics->f1) + ", structural-only " + fmt(s) + ", attribute-only " + fmt(a)};
  });

  criterion(11, "deterministic manifests", [&] {
    need_wa();
    auto again = cfg;
    again.output_dir = (work / "run2").string();
    run_pipeline(again);
    const auto m1 = slurp(work / "run1" / "MANIFEST"), m2 = slurp(work / "run2" / "MANIFEST");
    std::size_t lines = 0;
    for (char c : m1) lines += c == '\n';
    return Outcome{!m1.empty() && m1 == m2 && m1.rfind("status: complete", 0) == 0,
                   std::string(m1 == m2 ? "byte-identical" : "DIFFERENT") + " (" + std::to_string(lines) + " lines)"};
  });

  fs::remove_all(work);
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
