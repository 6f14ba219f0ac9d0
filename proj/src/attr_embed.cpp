#include "grapher/attr_embed.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "grapher/common.hpp"
#include "grapher/rng.hpp"

namespace grapher {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      cur += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> rule_attributes(std::span<const Gdd> rules) {
  std::set<std::string> names;
  for (const auto& r : rules)
    for (const auto& c : r.lhs) {
      if (c.form == ConstraintForm::cc) names.insert(c.attr);
      if (c.form == ConstraintForm::vc) {
        names.insert(c.attr);
        names.insert(c.attr2);
      }
    }
  return {names.begin(), names.end()};
}

std::optional<std::uint32_t> TripartiteGraph::token_index(std::string_view t) const {
  auto it = token_ids_.find(std::string(t));
  if (it == token_ids_.end()) return std::nullopt;
  return it->second;
}

namespace {

TripartiteGraph::Adjacency to_adjacency(const std::vector<std::map<std::uint32_t, std::uint32_t>>& m) {
  TripartiteGraph::Adjacency adj(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) adj[i].assign(m[i].begin(), m[i].end());
  return adj;
}

}  // namespace

TripartiteGraph build_tripartite(const PropertyGraph& g, std::span<const std::string> attributes) {
  TripartiteGraph tg;
  std::set<std::string> attrs(attributes.begin(), attributes.end());
  if (attrs.empty())
    for (const auto& n : g.nodes())
      for (const auto& a : n.attrs) attrs.insert(a.name);
  tg.attributes.assign(attrs.begin(), attrs.end());
  std::map<std::string, std::uint32_t> attr_ids;
  for (std::uint32_t i = 0; i < tg.attributes.size(); ++i) attr_ids[tg.attributes[i]] = i;

  std::vector<std::map<std::uint32_t, std::uint32_t>> et, te, ta, at(tg.attributes.size());
  for (const auto& n : g.nodes()) {
    tg.entities.push_back(n.id);
    et.emplace_back();
    for (const auto& a : n.attrs) {
      auto ait = attr_ids.find(a.name);
      if (ait == attr_ids.end()) continue;
      for (auto& tok : tokenize(a.value.text)) {
        auto [it, fresh] = tg.token_ids_.emplace(tok, static_cast<std::uint32_t>(tg.tokens.size()));
        if (fresh) {
          tg.tokens.push_back(tok);
          te.emplace_back();
          ta.emplace_back();
          tg.token_occurrences.push_back(0);
        }
        const auto t = it->second;
        const auto e = static_cast<std::uint32_t>(tg.entities.size() - 1);
        ++et[e][t];
        ++te[t][e];
        ++ta[t][ait->second];
        ++at[ait->second][t];
        ++tg.token_occurrences[t];
      }
    }
  }
  tg.entity_tokens = to_adjacency(et);
  tg.token_entities = to_adjacency(te);
  tg.token_attrs = to_adjacency(ta);
  tg.attr_tokens = to_adjacency(at);
  return tg;
}

TripartiteGraph build_tripartite(const PropertyGraph& g, std::span<const Gdd> rules) {
  auto attrs = rule_attributes(rules);
  return build_tripartite(g, attrs);
}

namespace {

template <typename Rng>
std::uint32_t weighted_pick(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& options, Rng& rng) {
  std::uint64_t total = 0;
  for (const auto& o : options) total += o.second;
  std::uint64_t r = std::uniform_int_distribution<std::uint64_t>(0, total - 1)(rng);
  for (const auto& o : options) {
    if (r < o.second) return o.first;
    r -= o.second;
  }
  return options.back().first;
}

}  // namespace

WalkCorpus tripartite_walks(const TripartiteGraph& tg, const TrainConfig& cfg) {
  cfg.validate();
  WalkCorpus corpus;
  enum class Step { entity, token_from_entity, attribute, token_from_attribute };
  for (std::uint32_t e = 0; e < tg.entities.size(); ++e) {
    if (tg.entity_tokens[e].empty()) continue;
    for (std::size_t r = 0; r < cfg.walks_per_node; ++r) {
      std::mt19937_64 rng(mix_seed(cfg.seed, e, r));
      std::vector<std::uint32_t> walk{corpus.intern(tg.entities[e], kEntityClass, false)};
      Step at = Step::entity;
      std::uint32_t cur = e;
      while (walk.size() < cfg.walk_length) {
        switch (at) {
          case Step::entity:
            cur = weighted_pick(tg.entity_tokens[cur], rng);
            walk.push_back(corpus.intern(tg.tokens[cur], kTokenClass, true));
            at = Step::token_from_entity;
            break;
          case Step::token_from_entity:
            cur = weighted_pick(tg.token_attrs[cur], rng);
            walk.push_back(corpus.intern(tg.attributes[cur], kAttributeClass, false));
            at = Step::attribute;
            break;
          case Step::attribute:
            cur = weighted_pick(tg.attr_tokens[cur], rng);
            walk.push_back(corpus.intern(tg.tokens[cur], kTokenClass, true));
            at = Step::token_from_attribute;
            break;
          case Step::token_from_attribute:
            cur = weighted_pick(tg.token_entities[cur], rng);
            walk.push_back(corpus.intern(tg.entities[cur], kEntityClass, false));
            at = Step::entity;
            break;
        }
      }
      corpus.sequences.push_back(std::move(walk));
      corpus.provenance.push_back(0);
    }
  }
  return corpus;
}

EmbeddingTable token_embeddings(const TripartiteGraph& tg, const TrainConfig& cfg) {
  if (tg.tokens.empty()) throw DataError("tripartite graph has no tokens");
  return train_skipgram(tripartite_walks(tg, cfg), cfg);
}

SifConfig SifConfig::from_tripartite(const TripartiteGraph& tg) {
  SifConfig cfg;
  double total = 0;
  for (auto c : tg.token_occurrences) total += static_cast<double>(c);
  for (std::size_t t = 0; t < tg.tokens.size(); ++t)
    cfg.frequency[tg.tokens[t]] = static_cast<double>(tg.token_occurrences[t]) / total;
  cfg.attributes = tg.attributes;
  return cfg;
}

SifAggregator::SifAggregator(const EmbeddingTable& tokens, SifConfig cfg)
    : tokens_(tokens), cfg_(std::move(cfg)), mean_(tokens.dim(), 0.0) {
  if (!(cfg_.a > 0)) throw ConfigError("SIF smoothing a must be > 0");
  for (std::size_t i = 0; i < tokens.size(); ++i)
    for (std::size_t k = 0; k < tokens.dim(); ++k) mean_[k] += tokens.row(i)[k];
  if (tokens.size())
    for (auto& x : mean_) x /= static_cast<double>(tokens.size());
}

namespace {

template <typename F>
void for_each_token(const Node& node, const std::vector<std::string>& attrs, F&& f) {
  for (const auto& a : node.attrs) {
    if (!attrs.empty() && std::find(attrs.begin(), attrs.end(), a.name) == attrs.end()) continue;
    for (const auto& t : tokenize(a.value.text)) f(t);
  }
}

}  // namespace

std::size_t SifAggregator::token_count(const Node& node) const {
  std::size_t n = 0;
  for_each_token(node, cfg_.attributes, [&](const std::string&) { ++n; });
  return n;
}

std::vector<double> SifAggregator::operator()(const Node& node) const {
  std::vector<double> v(tokens_.dim(), 0.0);
  std::size_t count = 0;
  for_each_token(node, cfg_.attributes, [&](const std::string& t) {
    auto it = cfg_.frequency.find(t);
    const double p = it == cfg_.frequency.end() ? 0.0 : it->second;
    const double w = cfg_.a / (cfg_.a + p);
    const double* f = tokens_.find(t);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += w * (f ? f[k] : mean_[k]);
    ++count;
  });
  if (count)
    for (auto& x : v) x /= static_cast<double>(count);
  return v;
}

std::vector<double> sif_aggregate(const Node& node, const EmbeddingTable& tokens, const SifConfig& cfg) {
  return SifAggregator(tokens, cfg)(node);
}

// ---------------------------------------------------------------------------

AutoEncoder::AutoEncoder(std::size_t input_dim, std::size_t latent_dim, std::uint64_t seed, std::size_t hidden_dim)
    : n_(input_dim), l_(latent_dim) {
  if (latent_dim < 1 || latent_dim >= input_dim)
    throw ConfigError("latent dim must be in [1, input dim); got " + std::to_string(latent_dim) + " for input " +
                      std::to_string(input_dim));
  h_ = hidden_dim ? hidden_dim : std::max(latent_dim, (input_dim + latent_dim) / 2);
  std::size_t off = 0;
  auto take = [&](std::size_t n) {
    std::size_t at = off;
    off += n;
    return at;
  };
  w1_ = take(h_ * n_), b1_ = take(h_), w2_ = take(l_ * h_), b2_ = take(l_);
  w3_ = take(h_ * l_), b3_ = take(h_), w4_ = take(n_ * h_), b4_ = take(n_);
  params_.assign(off, 0.0);
  std::mt19937_64 rng(seed);
  auto init = [&](std::size_t at, std::size_t rows, std::size_t cols) {
    const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-r, r);
    for (std::size_t i = 0; i < rows * cols; ++i) params_[at + i] = u(rng);
  };
  init(w1_, h_, n_);
  init(w2_, l_, h_);
  init(w3_, h_, l_);
  init(w4_, n_, h_);
}

namespace {

// y = W x + b with W stored row-major (rows × cols).
void affine(const double* w, const double* b, std::span<const double> x, std::vector<double>& y, std::size_t rows) {
  y.assign(rows, 0.0);
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = b[r];
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
    y[r] = s;
  }
}

std::vector<double> relu(const std::vector<double>& a) {
  std::vector<double> z(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) z[i] = a[i] > 0 ? a[i] : 0.0;
  return z;
}

}  // namespace

void AutoEncoder::forward(std::span<const double> x, Trace& t) const {
  if (x.size() != n_) throw DataError("auto-encoder input has wrong dimension");
  const double* p = params_.data();
  affine(p + w1_, p + b1_, x, t.a1, h_);
  t.z1 = relu(t.a1);
  affine(p + w2_, p + b2_, t.z1, t.l, l_);
  affine(p + w3_, p + b3_, t.l, t.a3, h_);
  t.z3 = relu(t.a3);
  affine(p + w4_, p + b4_, t.z3, t.o, n_);
}

std::vector<double> AutoEncoder::encode(std::span<const double> x) const {
  Trace t;
  forward(x, t);
  return t.l;
}

std::vector<double> AutoEncoder::reconstruct(std::span<const double> x) const {
  Trace t;
  forward(x, t);
  return t.o;
}

double AutoEncoder::loss(std::span<const std::vector<double>> batch) const {
  if (batch.empty()) return 0.0;
  Trace t;
  double total = 0;
  for (const auto& x : batch) {
    forward(x, t);
    for (std::size_t i = 0; i < n_; ++i) total += (t.o[i] - x[i]) * (t.o[i] - x[i]);
  }
  return total / static_cast<double>(batch.size());
}

std::vector<double> AutoEncoder::gradient(std::span<const std::vector<double>> batch) const {
  std::vector<double> g(params_.size(), 0.0);
  if (batch.empty()) return g;
  const double* p = params_.data();
  const double scale = 2.0 / static_cast<double>(batch.size());
  Trace t;
  std::vector<double> d_o(n_), d_a3(h_), d_l(l_), d_a1(h_);
  // Accumulates dW += dy ⊗ x, db += dy and returns Wᵀ dy.
  auto back = [&](std::size_t w, std::size_t b, const std::vector<double>& dy, std::span<const double> x,
                  std::vector<double>* dx) {
    const std::size_t rows = dy.size(), cols = x.size();
    if (dx) dx->assign(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      g[b + r] += dy[r];
      for (std::size_t c = 0; c < cols; ++c) {
        g[w + r * cols + c] += dy[r] * x[c];
        if (dx) (*dx)[c] += p[w + r * cols + c] * dy[r];
      }
    }
  };
  std::vector<double> d_z3, d_z1;
  for (const auto& x : batch) {
    forward(x, t);
    for (std::size_t i = 0; i < n_; ++i) d_o[i] = scale * (t.o[i] - x[i]);
    back(w4_, b4_, d_o, t.z3, &d_z3);
    for (std::size_t i = 0; i < h_; ++i) d_a3[i] = t.a3[i] > 0 ? d_z3[i] : 0.0;
    back(w3_, b3_, d_a3, t.l, &d_l);
    back(w2_, b2_, d_l, t.z1, &d_z1);
    for (std::size_t i = 0; i < h_; ++i) d_a1[i] = t.a1[i] > 0 ? d_z1[i] : 0.0;
    back(w1_, b1_, d_a1, x, nullptr);
  }
  return g;
}

void AutoEncoder::save(std::ostream& out) const {
  out << n_ << ' ' << h_ << ' ' << l_ << '\n';
  for (double v : params_) out << format_double(v) << '\n';
}

AutoEncoder AutoEncoder::load(std::istream& in) {
  std::size_t n = 0, h = 0, l = 0;
  if (!(in >> n >> h >> l)) throw DataError("auto-encoder file header must be '<input> <hidden> <latent>'");
  AutoEncoder ae(n, l, 0, h);
  for (auto& v : ae.params_) {
    std::string tok;
    if (!(in >> tok)) throw DataError("auto-encoder file truncated");
    v = std::stod(tok);
  }
  return ae;
}

AutoEncoderResult train_autoencoder(std::span<const std::string> keys, std::span<const std::vector<double>> vectors,
                                    const AutoEncoderConfig& cfg) {
  if (vectors.empty()) throw DataError("auto-encoder needs at least one input vector");
  if (keys.size() != vectors.size()) throw DataError("auto-encoder keys and vectors differ in count");
  const std::size_t n = vectors[0].size();
  for (const auto& v : vectors)
    if (v.size() != n) throw DataError("auto-encoder inputs have inconsistent dimensions");
  AutoEncoderResult res{AutoEncoder(n, cfg.latent_dim, cfg.seed, cfg.hidden_dim), EmbeddingTable(cfg.latent_dim), {}};
  auto& model = res.model;
  auto params = model.parameters();
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::size_t> order(vectors.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<double>> batch;
  const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(cfg.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) batch.push_back(vectors[order[i]]);
      auto g = model.gradient(batch);
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
        params[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
      }
    }
    res.loss_history.push_back(model.loss(vectors));
  }
  for (std::size_t i = 0; i < vectors.size(); ++i) res.latent.set(keys[i], model.encode(vectors[i]));
  return res;
}

EmbeddingTable embed_attributes(const PropertyGraph& g, std::span<const Gdd> rules,
                                const AttributeEmbeddingConfig& cfg) {
  auto tg = build_tripartite(g, rules);
  if (tg.tokens.empty()) return EmbeddingTable(cfg.encoder.latent_dim);
  auto tokens = token_embeddings(tg, cfg.tokens);
  auto sif_cfg = SifConfig::from_tripartite(tg);
  sif_cfg.a = cfg.sif_a;
  SifAggregator sif(tokens, sif_cfg);
  std::vector<std::string> keys;
  std::vector<std::vector<double>> vectors;
  for (const auto& n : g.nodes()) {
    if (!sif.token_count(n)) continue;
    keys.push_back(n.id);
    vectors.push_back(sif(n));
  }
  if (keys.empty()) return EmbeddingTable(cfg.encoder.latent_dim);
  return train_autoencoder(keys, vectors, cfg.encoder).latent;
}

}  // namespace grapher
