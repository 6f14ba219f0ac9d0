#include "grapher/struct_embed.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <thread>

#include "grapher/common.hpp"
#include "grapher/rng.hpp"

namespace grapher {

void TrainConfig::validate() const {
  if (dim < 1) throw ConfigError("embedding dim must be >= 1");
  if (window < 1) throw ConfigError("window must be >= 1");
  if (negatives < 1) throw ConfigError("negatives must be >= 1");
  if (walk_length < 1) throw ConfigError("walk_length must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (neg_exponent < 0) throw ConfigError("negative-sampling exponent must be >= 0");
}

std::string MetaPathScheme::text() const {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) s += '-';
    s += labels[i];
  }
  return s;
}

namespace {

void add_scheme(std::vector<MetaPathScheme>& out, MetaPathScheme s) {
  for (const auto& e : out)
    if (e.labels == s.labels) return;
  out.push_back(std::move(s));
}

// Simple paths between two vars of the pattern, edges taken in either direction.
void simple_paths(const GraphPattern& p, std::size_t from, std::size_t to,
                  std::vector<MetaPathScheme>& out) {
  std::vector<std::size_t> path{from};
  std::vector<std::string> edge_labels;
  std::vector<char> on_path(p.size(), 0);
  on_path[from] = 1;
  std::function<void(std::size_t)> dfs = [&](std::size_t at) {
    if (at == to) {
      MetaPathScheme s;
      for (auto v : path) s.labels.push_back(p.vars()[v].label);
      s.edge_labels = edge_labels;
      std::vector<std::string> rev(s.labels.rbegin(), s.labels.rend());
      if (rev != s.labels) {
        s.labels.insert(s.labels.end(), rev.begin() + 1, rev.end());
        std::vector<std::string> erev(edge_labels.rbegin(), edge_labels.rend());
        s.edge_labels.insert(s.edge_labels.end(), erev.begin(), erev.end());
      }
      add_scheme(out, std::move(s));
      return;
    }
    for (const auto& e : p.edges()) {
      std::size_t next;
      if (e.src == at) next = e.dst;
      else if (e.dst == at) next = e.src;
      else continue;
      if (on_path[next]) continue;
      on_path[next] = 1;
      path.push_back(next);
      edge_labels.push_back(e.label);
      dfs(next);
      edge_labels.pop_back();
      path.pop_back();
      on_path[next] = 0;
    }
  };
  dfs(from);
}

}  // namespace

std::vector<MetaPathScheme> metapath_schemes(const GraphPattern& scope) {
  std::vector<MetaPathScheme> all;
  for (std::size_t i = 0; i < scope.size(); ++i)
    for (std::size_t j = 0; j < scope.size(); ++j)
      if (i != j && scope.vars()[i].label == scope.vars()[j].label) simple_paths(scope, i, j, all);
  // v-g-v inside u-v-g-v-u is not a scheme of its own
  std::vector<MetaPathScheme> out;
  for (const auto& s : all) {
    bool inner = false;
    for (const auto& o : all)
      inner = inner || (o.labels.size() > s.labels.size() &&
                        std::search(o.labels.begin() + 1, o.labels.end() - 1, s.labels.begin(), s.labels.end()) !=
                            o.labels.end() - 1);
    if (!inner) out.push_back(s);
  }
  return out;
}

std::vector<MetaPathScheme> metapath_schemes(std::span<const Gdd> rules) {
  std::vector<MetaPathScheme> out;
  for (const auto& r : rules) {
    auto a = r.scope.var_index(r.eid_vars.first), b = r.scope.var_index(r.eid_vars.second);
    std::vector<MetaPathScheme> found;
    if (a && b && *a != *b) {
      simple_paths(r.scope, *a, *b, found);
      simple_paths(r.scope, *b, *a, found);
    } else {
      found = metapath_schemes(r.scope);
    }
    for (auto& s : found) add_scheme(out, std::move(s));
  }
  return out;
}

std::uint32_t WalkCorpus::intern(std::string_view token, std::string_view cls, bool can_center) {
  std::string key(cls);
  key += '\x1f';
  key += token;
  auto it = ids_.find(key);
  if (it != ids_.end()) return it->second;
  auto cit = class_ids_.find(std::string(cls));
  if (cit == class_ids_.end()) {
    cit = class_ids_.emplace(std::string(cls), static_cast<std::uint32_t>(classes.size())).first;
    classes.emplace_back(cls);
  }
  auto id = static_cast<std::uint32_t>(vocab.size());
  vocab.emplace_back(token);
  token_class.push_back(cit->second);
  center.push_back(can_center ? 1 : 0);
  ids_.emplace(std::move(key), id);
  return id;
}

std::size_t WalkCorpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

WalkCorpus random_walks(const PropertyGraph& g, std::span<const MetaPathScheme> schemes, const TrainConfig& cfg) {
  cfg.validate();
  WalkCorpus corpus;
  std::vector<std::vector<NodeIndex>> nbrs(g.node_count());
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    for (const auto& inc : g.incident(i)) nbrs[i].push_back(inc.neighbor);
    std::sort(nbrs[i].begin(), nbrs[i].end());
    nbrs[i].erase(std::unique(nbrs[i].begin(), nbrs[i].end()), nbrs[i].end());
  }
  std::vector<std::uint32_t> token_of(g.node_count(), std::numeric_limits<std::uint32_t>::max());
  auto token = [&](NodeIndex i) {
    if (token_of[i] == std::numeric_limits<std::uint32_t>::max())
      token_of[i] = corpus.intern(g.node(i).id, g.node(i).label);
    return token_of[i];
  };

  std::vector<NodeIndex> cand;
  for (std::size_t si = 0; si < schemes.size(); ++si) {
    const auto& labels = schemes[si].labels;
    if (labels.size() < 2) continue;
    if (cfg.walk_length < labels.size())
      throw ConfigError("walk_length " + std::to_string(cfg.walk_length) + " is shorter than scheme " +
                        schemes[si].text());
    const std::size_t period = labels.size() - 1;
    for (NodeIndex start = 0; start < g.node_count(); ++start) {
      if (!labels_match(g.node(start).label, labels[0])) continue;
      for (std::size_t r = 0; r < cfg.walks_per_node; ++r) {
        std::mt19937_64 rng(mix_seed(cfg.seed, si, start, r));
        std::vector<std::uint32_t> walk{token(start)};
        NodeIndex cur = start;
        for (std::size_t t = 0; walk.size() < cfg.walk_length; ++t) {
          const auto& want = labels[(t + 1) % period];
          cand.clear();
          for (auto n : nbrs[cur])
            if (labels_match(g.node(n).label, want)) cand.push_back(n);
          if (cand.empty()) break;
          cur = cand[std::uniform_int_distribution<std::size_t>(0, cand.size() - 1)(rng)];
          walk.push_back(token(cur));
        }
        corpus.sequences.push_back(std::move(walk));
        corpus.provenance.push_back(static_cast<std::uint32_t>(si));
      }
    }
  }
  return corpus;
}

namespace {

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x > 30) return 1.0;
  if (x < -30) return 0.0;
  return 1.0 / (1.0 + std::exp(-x));
}

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

}  // namespace

SkipGram::SkipGram(const WalkCorpus& corpus, const TrainConfig& cfg) : corpus_(corpus), cfg_(cfg) {
  cfg_.validate();
  if (corpus.sequences.empty() || corpus.vocab.empty()) throw DataError("skip-gram corpus is empty");
  const std::size_t v = corpus.vocab.size(), d = cfg_.dim;
  in_.resize(v * d);
  out_.assign(v * d, 0.0);
  std::mt19937_64 rng(cfg_.seed);
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(d), 0.5 / static_cast<double>(d));
  for (auto& x : in_) x = init(rng);

  std::vector<std::size_t> counts(v, 0);
  for (const auto& s : corpus.sequences)
    for (auto t : s) {
      ++counts[t];
      if (corpus.center[t]) ++tokens_per_epoch_;
    }
  pools_.resize(corpus.classes.size());
  for (std::uint32_t t = 0; t < v; ++t) {
    if (!counts[t]) continue;
    auto& pool = pools_[corpus.token_class[t]];
    double w = std::pow(static_cast<double>(counts[t]), cfg_.neg_exponent);
    pool.tokens.push_back(t);
    pool.cumulative.push_back((pool.cumulative.empty() ? 0.0 : pool.cumulative.back()) + w);
  }
}

template <typename Rng>
std::uint32_t SkipGram::draw_negative(std::uint32_t context, Rng& rng) const {
  const auto& pool = pools_[corpus_.token_class[context]];
  if (pool.tokens.size() < 2) return kNone;
  std::uniform_real_distribution<double> u(0.0, pool.cumulative.back());
  for (int attempt = 0; attempt < 16; ++attempt) {
    auto it = std::upper_bound(pool.cumulative.begin(), pool.cumulative.end(), u(rng));
    auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - pool.cumulative.begin()), pool.tokens.size() - 1);
    if (pool.tokens[idx] != context) return pool.tokens[idx];
  }
  return kNone;
}

void SkipGram::train_range(std::size_t begin, std::size_t end, std::uint64_t seed, std::size_t processed) {
  const std::size_t d = cfg_.dim;
  const double total = static_cast<double>(std::max<std::size_t>(1, cfg_.epochs * tokens_per_epoch_));
  std::mt19937_64 rng(seed);
  std::vector<double> grad(d);
  for (std::size_t si = begin; si < end; ++si) {
    const auto& seq = corpus_.sequences[si];
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const auto v = seq[i];
      if (!corpus_.center[v]) continue;
      const double lr = cfg_.learning_rate * std::max(1e-4, 1.0 - static_cast<double>(processed) / total);
      ++processed;
      double* fv = &in_[v * d];
      const std::size_t lo = i >= cfg_.window ? i - cfg_.window : 0;
      const std::size_t hi = std::min(seq.size() - 1, i + cfg_.window);
      for (std::size_t j = lo; j <= hi; ++j) {
        if (j == i) continue;
        const auto u = seq[j];
        std::fill(grad.begin(), grad.end(), 0.0);
        auto update = [&](std::uint32_t t, double label) {
          double* ct = &out_[t * d];
          double f = 0;
          for (std::size_t k = 0; k < d; ++k) f += fv[k] * ct[k];
          const double g = lr * (label - sigmoid(f));
          for (std::size_t k = 0; k < d; ++k) {
            grad[k] += g * ct[k];
            ct[k] += g * fv[k];
          }
        };
        update(u, 1.0);
        for (std::size_t n = 0; n < cfg_.negatives; ++n) {
          auto w = draw_negative(u, rng);
          if (w != kNone) update(w, 0.0);
        }
        for (std::size_t k = 0; k < d; ++k) fv[k] += grad[k];
      }
    }
  }
}

void SkipGram::train_epoch() {
  const std::size_t nseq = corpus_.sequences.size();
  const std::size_t base = epochs_done_ * tokens_per_epoch_;
  const std::uint64_t epoch_seed = mix_seed(cfg_.seed, 0x5eed, epochs_done_);
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg_.workers, nseq));
  if (workers == 1) {
    train_range(0, nseq, epoch_seed, base);
  } else {
    // Workers update the shared tables without locks; occasional lost updates are tolerated.
    std::vector<std::thread> threads;
    std::size_t processed = base;
    for (std::size_t w = 0; w < workers; ++w) {
      std::size_t b = nseq * w / workers, e = nseq * (w + 1) / workers;
      threads.emplace_back(&SkipGram::train_range, this, b, e, mix_seed(epoch_seed, w), processed);
      for (std::size_t s = b; s < e; ++s)
        for (auto t : corpus_.sequences[s]) processed += corpus_.center[t] ? 1 : 0;
    }
    for (auto& t : threads) t.join();
  }
  ++epochs_done_;
}

std::vector<SgnsSample> SkipGram::sample_pairs(std::size_t n, std::uint64_t seed) const {
  std::vector<SgnsSample> out;
  std::mt19937_64 rng(seed);
  const auto& seqs = corpus_.sequences;
  std::uniform_int_distribution<std::size_t> pick_seq(0, seqs.size() - 1);
  for (std::size_t attempts = 0; out.size() < n && attempts < n * 100; ++attempts) {
    const auto& s = seqs[pick_seq(rng)];
    if (s.size() < 2) continue;
    std::size_t i = std::uniform_int_distribution<std::size_t>(0, s.size() - 1)(rng);
    if (!corpus_.center[s[i]]) continue;
    const std::size_t lo = i >= cfg_.window ? i - cfg_.window : 0;
    const std::size_t hi = std::min(s.size() - 1, i + cfg_.window);
    std::size_t j = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    if (j == i) continue;
    SgnsSample sample{s[i], s[j], {}};
    for (std::size_t k = 0; k < cfg_.negatives; ++k) {
      auto w = draw_negative(s[j], rng);
      if (w != kNone) sample.negatives.push_back(w);
    }
    out.push_back(std::move(sample));
  }
  return out;
}

double SkipGram::objective(std::span<const SgnsSample> samples) const {
  if (samples.empty()) return 0.0;
  const std::size_t d = cfg_.dim;
  auto score = [&](std::uint32_t a, std::uint32_t b) {
    return dot({&in_[a * d], d}, {&out_[b * d], d});
  };
  double total = 0;
  for (const auto& s : samples) {
    total += log_sigmoid(score(s.center, s.context));
    for (auto w : s.negatives) total += log_sigmoid(-score(s.center, w));
  }
  return total / static_cast<double>(samples.size());
}

EmbeddingTable SkipGram::embeddings() const {
  std::vector<std::uint32_t> ids;
  for (std::uint32_t t = 0; t < corpus_.vocab.size(); ++t)
    if (corpus_.center[t]) ids.push_back(t);
  std::sort(ids.begin(), ids.end(),
            [&](auto a, auto b) { return natural_less(corpus_.vocab[a], corpus_.vocab[b]); });
  EmbeddingTable table(cfg_.dim);
  for (auto t : ids) table.set(corpus_.vocab[t], {&in_[t * cfg_.dim], cfg_.dim});
  return table;
}

EmbeddingTable train_skipgram(const WalkCorpus& corpus, const TrainConfig& cfg) {
  SkipGram model(corpus, cfg);
  for (std::size_t e = 0; e < cfg.epochs; ++e) model.train_epoch();
  return model.embeddings();
}

EmbeddingTable embed_structure(const PropertyGraph& g, std::span<const Gdd> rules, const TrainConfig& cfg) {
  auto schemes = metapath_schemes(rules);
  if (schemes.empty()) return EmbeddingTable(cfg.dim);
  auto corpus = random_walks(g, schemes, cfg);
  if (corpus.sequences.empty()) return EmbeddingTable(cfg.dim);
  return train_skipgram(corpus, cfg);
}

}  // namespace grapher
