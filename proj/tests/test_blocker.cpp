#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "grapher/blocker.hpp"
#include "grapher/struct_embed.hpp"
#include "oracles.hpp"

using namespace grapher;

namespace {

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

// A unit vector at angle acos(1 - dist) from unit vector u.
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

PropertyGraph labelled(const EmbeddingTable& t, const std::string& label = "x") {
  PropertyGraph g;
  for (const auto& k : t.keys()) g.add_node({k, label, std::nullopt, {}});
  return g;
}

std::set<std::string> members(const Block& b) { return {b.members.begin(), b.members.end()}; }

}  // namespace

TEST_CASE("hashing is sign-deterministic") {
  std::mt19937_64 rng(1);
  EmbeddingTable t(8);
  for (int i = 0; i < 20; ++i) t.set("n" + std::to_string(i), gaussian(rng, 8));
  LshIndex index(t, 16, 12, 5);
  for (int i = 0; i < 20; ++i) {
    auto v = gaussian(rng, 8);
    std::vector<double> neg(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) neg[k] = -v[k];
    for (std::size_t tb = 0; tb < 16; ++tb) {
      CHECK(index.bucket_key(tb, v) == index.bucket_key(tb, v));
      CHECK((index.bucket_key(tb, v) ^ index.bucket_key(tb, neg)) == (std::uint64_t{1} << 12) - 1);
    }
  }
  // every indexed row is its own candidate
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto c = index.candidates(t.row(i));
    CHECK(std::find(c.begin(), c.end(), i) != c.end());
  }
}

TEST_CASE("collision rate at 60 degrees matches the hyperplane formula") {
  std::mt19937_64 rng(2);
  const std::size_t d = 16, pairs = 1000, tables = 16, bits = 12;
  EmbeddingTable t(d);
  std::vector<std::pair<std::vector<double>, std::vector<double>>> probes;
  for (std::size_t i = 0; i < pairs; ++i) {
    auto u = unit(gaussian(rng, d));
    probes.emplace_back(u, at_distance(rng, u, 0.5));
    t.set("p" + std::to_string(i), u);
  }
  LshIndex index(t, tables, bits, 9);
  std::size_t hits = 0;
  for (const auto& [u, v] : probes)
    for (std::size_t tb = 0; tb < tables; ++tb) hits += index.bucket_key(tb, u) == index.bucket_key(tb, v);
  const double p = std::pow(1 - 60.0 / 180.0, static_cast<double>(bits));
  const double n = static_cast<double>(pairs * tables);
  const double sigma = std::sqrt(n * p * (1 - p));
  INFO("hits " << hits << " expected " << n * p);
  CHECK(std::abs(static_cast<double>(hits) - n * p) <= 3 * sigma);
}

TEST_CASE("query blocks") {
  EmbeddingTable t(2);
  const double q[] = {1, 0}, dup[] = {2, 0}, near[] = {1, 0.1}, far[] = {0, 1};
  t.set("q", q);
  t.set("dup", dup);
  t.set("near", near);
  t.set("far", far);
  auto g = labelled(t);
  LshIndex index(t, 16, 4, 3);
  CHECK(members(query_block(index, "q", g, 0.0, 10)) == std::set<std::string>{"q", "dup"});
  CHECK(query_block(index, "q", g, 0.3, 1).members == std::vector<std::string>{"q"});
  auto b = query_block(index, "q", g, 0.3, 10);
  CHECK(std::find(b.members.begin(), b.members.end(), "far") == b.members.end());
  CHECK(std::find(b.members.begin(), b.members.end(), "near") != b.members.end());
  // cap keeps the nearest
  CHECK(members(query_block(index, "q", g, 0.3, 2)) == std::set<std::string>{"q", "dup"});
  CHECK_THROWS_AS(query_block(index, "missing", g, 0.3, 10), NotFoundError);
}

TEST_CASE("blocks stay within the query label") {
  EmbeddingTable t(2);
  const double v[] = {1, 0};
  for (const char* k : {"a1", "a2", "b1", "b2"}) t.set(k, v);
  PropertyGraph g;
  g.add_node({"a1", "A", std::nullopt, {}});
  g.add_node({"a2", "A", std::nullopt, {}});
  g.add_node({"b1", "B", std::nullopt, {}});
  g.add_node({"b2", "B", std::nullopt, {}});
  BlockerParams params;
  auto blocks = generate_blocks(&t, nullptr, g, params);
  REQUIRE(blocks.size() == 4);
  for (const auto& b : blocks)
    for (const auto& m : b.members) CHECK(g.node(m).label == g.node(b.query).label);
  params.labels = {"B"};
  auto only_b = generate_blocks(&t, nullptr, g, params);
  REQUIRE(only_b.size() == 2);
  CHECK(only_b[0].query == "b1");
}

TEST_CASE("structural and attribute blocks merge per query") {
  EmbeddingTable s(2), a(2);
  const double one[] = {1, 0}, close[] = {1, 0.01}, away[] = {-1, 0};
  s.set("q", one);
  s.set("a", close);
  s.set("b", away);
  a.set("q", one);
  a.set("b", close);
  a.set("a", away);
  EmbeddingTable both = s;
  auto g = labelled(both);
  BlockerParams params;
  params.labels = {};
  auto blocks = generate_blocks(&s, &a, g, params);
  auto it = std::find_if(blocks.begin(), blocks.end(), [](const Block& b) { return b.query == "q"; });
  REQUIRE(it != blocks.end());
  CHECK(it->members == std::vector<std::string>{"a", "b", "q"});
  CHECK(it->source == BlockSource::merged);
}

TEST_CASE("candidate pair counts") {
  std::vector<Block> six{{"v2", {"v2", "v3", "v4", "v5", "v10", "v11"}}};
  CHECK(candidate_pair_count(six) == 15);
  std::vector<Block> single{{"v2", {"v2"}}};
  CHECK(candidate_pair_count(single) == 0);
  // summed per block, so a pair in two blocks counts twice
  std::vector<Block> overlap{{"a", {"a", "b", "c"}}, {"b", {"a", "b"}}};
  CHECK(candidate_pair_count(overlap) == 4);
}

TEST_CASE("blocking recall on planted duplicates") {
  std::mt19937_64 rng(17);
  const std::size_t d = 32, bases = 200;
  EmbeddingTable t(d);
  std::vector<std::vector<double>> kept;
  std::vector<std::pair<std::string, std::string>> truth;
  std::uniform_real_distribution<double> small(1e-4, 0.1);
  while (kept.size() < bases) {
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
  auto g = labelled(t);
  BlockerParams params;
  params.seed = 4;
  auto blocks = generate_blocks(&t, nullptr, g, params);
  std::set<std::pair<std::string, std::string>> together;
  for (const auto& b : blocks)
    for (const auto& x : b.members)
      for (const auto& y : b.members) together.insert({x, y});
  std::size_t found = 0;
  for (const auto& p : truth) found += together.count(p);
  INFO("found " << found << " of " << truth.size());
  CHECK(static_cast<double>(found) >= 0.95 * static_cast<double>(truth.size()));
}

TEST_CASE("relaxing the distance never shrinks a block") {
  std::mt19937_64 rng(5);
  EmbeddingTable t(6);
  for (int i = 0; i < 80; ++i) t.set("n" + std::to_string(i), gaussian(rng, 6));
  auto g = labelled(t);
  BlockerParams params;
  params.bits = 4;
  params.cap = 1000;
  std::vector<Block> prev;
  for (double md : {0.0, 0.1, 0.3, 0.6, 1.0, 2.0}) {
    params.max_dist = md;
    auto blocks = generate_blocks(&t, nullptr, g, params);
    if (!prev.empty()) {
      REQUIRE(blocks.size() == prev.size());
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        auto now = members(blocks[i]);
        for (const auto& m : prev[i].members) CHECK(now.count(m));
      }
    }
    prev = std::move(blocks);
  }
}

TEST_CASE("blocks round-trip through text") {
  std::vector<Block> blocks{{"v2", {"v2", "v5"}, BlockSource::merged}, {"v3", {"v3", "v4", "v10"}, BlockSource::merged}};
  std::stringstream s;
  write_blocks(s, blocks);
  CHECK(read_blocks(s) == blocks);
  std::istringstream bad("v2\n");
  CHECK_THROWS_AS(read_blocks(bad), DataError);
}

TEST_CASE("structural block of v3 on the toy graph") {
  auto g = load_graph_files(oracle::data_path("fig1/nodes.jsonl"), oracle::data_path("fig1/edges.jsonl"));
  auto rules = load_rules_file(oracle::data_path("fig1/rules_example4.json"));
  TrainConfig cfg;
  cfg.dim = 16;
  auto emb = embed_structure(g, rules, cfg);
  BlockerParams params;
  params.labels = {"user"};
  auto blocks = generate_blocks(&emb, nullptr, g, params);
  auto it = std::find_if(blocks.begin(), blocks.end(), [](const Block& b) { return b.query == "v3"; });
  REQUIRE(it != blocks.end());
  CHECK(it->members == std::vector<std::string>{"v3", "v4", "v10", "v11"});
}
