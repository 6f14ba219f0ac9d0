#include "grapher/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grapher/gdd.hpp"
#include "grapher/rng.hpp"

namespace grapher {

GroundTruth ground_truth(const PropertyGraph& g) {
  GroundTruth t;
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> groups;
  for (const auto& n : g.nodes()) {
    ++t.label_counts[n.label];
    if (n.eid) groups[{n.label, *n.eid}].push_back(n.id);
  }
  for (const auto& [key, ids] : groups)
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = i + 1; j < ids.size(); ++j) t.pairs.insert(NodePair(ids[i], ids[j]));
  return t;
}

bool has_eids(const PropertyGraph& g) {
  for (const auto& n : g.nodes())
    if (n.eid) return true;
  return false;
}

PairMetrics pair_metrics(std::span<const NodePair> predicted, const GroundTruth& truth) {
  if (truth.pairs.empty()) throw DataError("ground truth has no pairs; recall is undefined");
  PairMetrics m;
  std::set<NodePair> pred(predicted.begin(), predicted.end());
  m.predicted = pred.size();
  m.truth = truth.pairs.size();
  for (const auto& p : pred) m.correct += truth.contains(p) ? 1 : 0;
  m.empty_prediction = pred.empty();
  m.precision = pred.empty() ? 0.0 : static_cast<double>(m.correct) / static_cast<double>(m.predicted);
  m.recall = static_cast<double>(m.correct) / static_cast<double>(m.truth);
  m.f1 = m.precision + m.recall == 0 ? 0.0 : 2 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

double cssr_g(std::span<const NodePair> candidates, const PropertyGraph& g) {
  if (candidates.empty()) return 0.0;
  std::set<NodePair> unique(candidates.begin(), candidates.end());
  std::set<std::string> labels;
  for (const auto& p : unique) {
    const auto& la = g.node(p.first).label;
    if (g.node(p.second).label != la) throw DataError("candidate pair (" + p.first + ", " + p.second + ") mixes labels");
    labels.insert(la);
  }
  double denom = 0;
  for (const auto& l : labels) {
    const double n = static_cast<double>(g.label_count(l));
    if (n < 2) throw DataError("label '" + l + "' has fewer than two nodes");
    denom += n * (n - 1) / 2;
  }
  return static_cast<double>(unique.size()) / denom;
}

double purity(std::span<const Block> blocks, const GroundTruth& truth) {
  if (blocks.empty()) return 1.0;
  double total = 0;
  for (const auto& b : blocks) {
    if (b.members.size() < 2) {
      total += 1.0;
      continue;
    }
    std::size_t good = 0;
    for (std::size_t i = 0; i < b.members.size(); ++i)
      for (std::size_t j = i + 1; j < b.members.size(); ++j) good += truth.contains(NodePair(b.members[i], b.members[j]));
    total += static_cast<double>(good) / static_cast<double>(b.pair_count());
  }
  return total / static_cast<double>(blocks.size());
}

namespace {

std::string single_edit(std::string s, std::mt19937_64& rng, std::string_view alphabet) {
  auto pick_char = [&] { return alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)]; };
  int op = s.empty() ? 1 : std::uniform_int_distribution<int>(0, 2)(rng);
  if (op == 0) {
    s[std::uniform_int_distribution<std::size_t>(0, s.size() - 1)(rng)] = pick_char();
  } else if (op == 1) {
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(std::uniform_int_distribution<std::size_t>(0, s.size())(rng)),
             pick_char());
  } else {
    s.erase(s.begin() + static_cast<std::ptrdiff_t>(std::uniform_int_distribution<std::size_t>(0, s.size() - 1)(rng)));
  }
  return s;
}

}  // namespace

std::string perturb_value(std::string_view value, std::mt19937_64& rng) {
  const bool digits = !value.empty() && std::all_of(value.begin(), value.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c));
  });
  const std::string_view alphabet = digits ? "0123456789" : "abcdefghijklmnopqrstuvwxyz";
  for (int attempt = 0; attempt < 1000; ++attempt) {
    auto s = single_edit(single_edit(std::string(value), rng, alphabet), rng, alphabet);
    if (levenshtein(s, value) == 2) return s;
  }
  // Two appended characters are always exactly two edits away.
  return std::string(value) + std::string(2, alphabet[0]);
}

NoisyGraph generate_noisy(const PropertyGraph& g, const NoiseSpec& spec) {
  if (spec.duplicate_rate < 0 || spec.duplicate_rate > 1) throw ConfigError("duplicate rate must lie in [0, 1]");
  std::vector<NodeIndex> targets;
  for (NodeIndex i = 0; i < g.node_count(); ++i)
    if (g.node(i).label == spec.label) targets.push_back(i);
  if (targets.empty() && spec.duplicate_rate > 0)
    throw DataError("no nodes with label '" + spec.label + "' to duplicate");
  const auto count = static_cast<std::size_t>(std::llround(spec.duplicate_rate * static_cast<double>(targets.size())));
  std::mt19937_64 rng(spec.seed);
  std::shuffle(targets.begin(), targets.end(), rng);
  targets.resize(count);
  std::sort(targets.begin(), targets.end());
  std::vector<char> sampled(g.node_count(), 0);
  for (auto t : targets) sampled[t] = 1;

  NoisyGraph out;
  for (NodeIndex i = 0; i < g.node_count(); ++i) {
    Node n = g.node(i);
    if (sampled[i] && !n.eid) n.eid = n.id;
    out.graph.add_node(std::move(n));
  }
  for (const auto& e : g.edges()) out.graph.add_edge(e);

  std::vector<Edge> dup_edges;
  for (auto t : targets) {
    std::mt19937_64 r(mix_seed(spec.seed, t));
    const Node& orig = out.graph.node(t);
    Node dup;
    dup.id = orig.id + "_dup";
    for (int k = 2; out.graph.find(dup.id); ++k) dup.id = orig.id + "_dup" + std::to_string(k);
    dup.label = orig.label;
    dup.eid = orig.eid;
    for (const auto& a : orig.attrs) {
      int choice = spec.attribute_noise ? std::uniform_int_distribution<int>(0, 2)(r) : 0;
      if (choice == 0) dup.attrs.push_back(a);
      else if (choice == 1) dup.attrs.push_back({a.name, AttrValue(perturb_value(a.value.text, r))});
    }
    std::vector<std::uint32_t> incident;
    for (const auto& inc : g.incident(t)) incident.push_back(inc.edge);
    std::sort(incident.begin(), incident.end());
    incident.erase(std::unique(incident.begin(), incident.end()), incident.end());
    if (spec.structural_noise && !incident.empty()) {
      const double frac = std::uniform_real_distribution<double>(0.0, 0.5)(r);
      auto drop = static_cast<std::size_t>(std::llround(frac * static_cast<double>(incident.size())));
      std::shuffle(incident.begin(), incident.end(), r);
      incident.resize(incident.size() - drop);
      std::sort(incident.begin(), incident.end());
    }
    for (auto ei : incident) {
      Edge e = g.edge(ei);
      if (e.src == orig.id) e.src = dup.id;
      if (e.dst == orig.id) e.dst = dup.id;
      dup_edges.push_back(std::move(e));
    }
    out.graph.add_node(std::move(dup));
  }
  for (auto& e : dup_edges) out.graph.add_edge(std::move(e));
  out.truth = ground_truth(out.graph);
  return out;
}

namespace {

std::string make_name(std::mt19937_64& rng, int min_syl, int max_syl) {
  static constexpr std::string_view onsets[] = {"b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p",
                                                "r", "s", "t", "v", "w", "z", "br", "ch", "st", "tr", "sh"};
  static constexpr std::string_view vowels[] = {"a", "e", "i", "o", "u", "ae", "ia", "ou", "y"};
  static constexpr std::string_view codas[] = {"", "", "", "n", "r", "s", "l", "th", "m"};
  std::string s;
  int syl = std::uniform_int_distribution<int>(min_syl, max_syl)(rng);
  for (int i = 0; i < syl; ++i) {
    s += onsets[std::uniform_int_distribution<std::size_t>(0, std::size(onsets) - 1)(rng)];
    s += vowels[std::uniform_int_distribution<std::size_t>(0, std::size(vowels) - 1)(rng)];
    s += codas[std::uniform_int_distribution<std::size_t>(0, std::size(codas) - 1)(rng)];
  }
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string digits(std::mt19937_64& rng, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += static_cast<char>('0' + std::uniform_int_distribution<int>(0, 9)(rng));
  return s;
}

}  // namespace

PropertyGraph synthetic_people_graph(const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  PropertyGraph g;
  std::vector<std::string> first, last;
  for (int i = 0; i < 300; ++i) first.push_back(make_name(rng, 2, 3));
  for (int i = 0; i < 1000; ++i) last.push_back(make_name(rng, 2, 3));
  static constexpr std::string_view domains[] = {"mail.com", "post.net", "inbox.org", "web.io", "box.co"};
  for (std::size_t c = 1; c <= spec.cities; ++c)
    g.add_node({"c" + std::to_string(c), "city", std::nullopt, {{"name", AttrValue(make_name(rng, 2, 4) + " City")}}});
  for (std::size_t c = 1; c <= spec.companies; ++c)
    g.add_node({"o" + std::to_string(c), "company", std::nullopt,
                {{"name", AttrValue(make_name(rng, 2, 3) + " " + make_name(rng, 1, 2) + " Ltd")}}});
  std::vector<Edge> edges;
  for (std::size_t p = 1; p <= spec.persons; ++p) {
    const auto& fn = first[std::uniform_int_distribution<std::size_t>(0, first.size() - 1)(rng)];
    const auto& ln = last[std::uniform_int_distribution<std::size_t>(0, last.size() - 1)(rng)];
    std::string email = case_fold(fn) + "." + case_fold(ln) + digits(rng, 2) + "@" +
                        std::string(domains[std::uniform_int_distribution<std::size_t>(0, std::size(domains) - 1)(rng)]);
    std::string birth = "19" + std::to_string(std::uniform_int_distribution<int>(40, 99)(rng)) + "-" +
                        std::to_string(std::uniform_int_distribution<int>(10, 12)(rng)) + "-" +
                        std::to_string(std::uniform_int_distribution<int>(10, 28)(rng));
    std::string id = "p" + std::to_string(p);
    g.add_node({id, "person", "e" + std::to_string(p),
                {{"FIRSTNAME", AttrValue(fn)},
                 {"LASTNAME", AttrValue(ln)},
                 {"PHONE", AttrValue("04" + digits(rng, 8))},
                 {"EMAIL", AttrValue(email)},
                 {"BIRTHDATE", AttrValue(birth)}}});
    edges.push_back({id, "lives_in", "c" + std::to_string(std::uniform_int_distribution<std::size_t>(1, spec.cities)(rng))});
    edges.push_back(
        {id, "works_at", "o" + std::to_string(std::uniform_int_distribution<std::size_t>(1, spec.companies)(rng))});
  }
  for (auto& e : edges) g.add_edge(std::move(e));
  return g;
}

nlohmann::ordered_json metrics_to_json(const PairMetrics& m) {
  nlohmann::ordered_json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["predicted"] = m.predicted;
  j["truth"] = m.truth;
  j["correct"] = m.correct;
  if (m.empty_prediction) j["empty_prediction"] = true;
  return j;
}

}  // namespace grapher
