#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "grapher/graph.hpp"
#include "grapher/pattern.hpp"

namespace grapher {

// ---------------------------------------------------------------------------
// Distance functions. Every kind returns 0 when either side is the wildcard "*".

enum class DistanceKind { normalized_edit, exact, numeric_abs, jaccard_token };

std::string_view to_string(DistanceKind k);
DistanceKind distance_kind_from_string(std::string_view s);

std::size_t levenshtein(std::string_view a, std::string_view b);
// Levenshtein / max length; 0 for two empty strings.
double normalized_edit(std::string_view a, std::string_view b);
// 1 - |A∩B|/|A∪B| over case-folded word tokens.
double jaccard_token_distance(std::string_view a, std::string_view b);

// Throws DataError for numeric_abs on non-numeric text.
double distance(DistanceKind kind, std::string_view a, std::string_view b);

// ---------------------------------------------------------------------------

enum class ConstraintForm { cc, vc, eid_cc, eid_vc, rel_cc, rel_vc };

std::string_view to_string(ConstraintForm f);
ConstraintForm constraint_form_from_string(std::string_view s);

// δ(x.A, c) ≤ t (CC forms) or δ(x.A1, x'.A2) ≤ t (VC forms). For eid and relation forms
// `attr` is unused / holds the relation name and the threshold is 0.
struct DistanceConstraint {
  ConstraintForm form = ConstraintForm::vc;
  std::string var;
  std::string attr;
  std::string var2;
  std::string attr2;
  std::string constant;
  DistanceKind fn = DistanceKind::normalized_edit;
  double threshold = 0;

  static DistanceConstraint same_attr(std::string x, std::string x2, std::string attr, DistanceKind fn,
                                      double t);
  static DistanceConstraint eid_equal(std::string x, std::string x2);

  bool operator==(const DistanceConstraint&) const = default;
};

// Read access to the values a constraint compares.
class RowAccessor {
 public:
  virtual ~RowAccessor() = default;
  // Attribute text, or "*" when absent. Throws when the var/attribute cannot be resolved.
  virtual std::string value(std::string_view var, std::string_view attr) const = 0;
  virtual std::optional<std::string> eid(std::string_view var) const = 0;
  virtual std::vector<std::string> relation(std::string_view var, std::string_view rel) const = 0;
};

class PseudoRowAccessor : public RowAccessor {
 public:
  PseudoRowAccessor(const PseudoRelation& pr, std::size_t row) : pr_(pr), row_(row) {}
  std::string value(std::string_view var, std::string_view attr) const override;
  std::optional<std::string> eid(std::string_view var) const override;
  std::vector<std::string> relation(std::string_view var, std::string_view rel) const override;

 private:
  const PseudoRelation& pr_;
  std::size_t row_;
};

// Values read straight from the graph for a homomorphism. With `strict`, a missing attribute
// is an evaluation error instead of a wildcard.
class MatchAccessor : public RowAccessor {
 public:
  MatchAccessor(const PropertyGraph& g, const GraphPattern& p, const Assignment& h, bool strict = false)
      : g_(g), p_(p), h_(h), strict_(strict) {}
  std::string value(std::string_view var, std::string_view attr) const override;
  std::optional<std::string> eid(std::string_view var) const override;
  std::vector<std::string> relation(std::string_view var, std::string_view rel) const override;

 private:
  const Node& node(std::string_view var) const;
  const PropertyGraph& g_;
  const GraphPattern& p_;
  const Assignment& h_;
  bool strict_;
};

// Measured distance (0/1 for eid and relation forms).
double measure(const DistanceConstraint& c, const RowAccessor& row);
bool eval_constraint(const DistanceConstraint& c, const RowAccessor& row);

// GDD_L: (scope, Φ_X → δ_eid(x, x') = 0).
struct Gdd {
  GraphPattern scope;
  std::vector<DistanceConstraint> lhs;
  std::vector<DistanceConstraint> rhs;
  std::size_t support = 0;
  std::pair<std::string, std::string> eid_vars;

  Gdd(GraphPattern scope, std::vector<DistanceConstraint> lhs, std::pair<std::string, std::string> eid_vars,
      std::size_t support = 0);
};

bool satisfies_lhs(const Gdd& g, const RowAccessor& row);

nlohmann::json rule_to_json(const Gdd& g);
Gdd rule_from_json(const nlohmann::json& j);
std::vector<Gdd> read_rules(std::istream& in);
std::vector<Gdd> load_rules_file(const std::string& path);
void write_rules(std::ostream& out, std::span<const Gdd> rules);
// φ notation, e.g. "(Q[x, x', y], δ_FN(x, x') ≤ 0.24 ∧ δ_LN(x, x') = 0 → δ_eid(x, x') = 0)".
std::string describe(const Gdd& g);

// ---------------------------------------------------------------------------
// Discovery

struct AttributeSpec {
  std::string attr;
  DistanceKind fn = DistanceKind::normalized_edit;
  std::vector<double> grid;            // candidate thresholds
  std::vector<std::string> constants;  // enables CCs on both eid vars
};

struct DiscoveryConfig {
  std::pair<std::string, std::string> eid_vars;
  std::vector<AttributeSpec> attributes;
  std::vector<std::string> relations;  // exact rel-VCs
  std::size_t max_lhs = 0;             // 0 = unbounded

  static std::vector<double> default_grid() { return {0, 0.1, 0.2, 0.3, 0.4, 0.5}; }
};

// One lattice dimension: a constraint shape whose threshold is picked from `grid`.
struct DiscoverySlot {
  DistanceConstraint shape;
  std::vector<double> grid;  // ascending
};

std::vector<DiscoverySlot> discovery_slots(const DiscoveryConfig& config);

// Minimal (non-redundant) GDD_Ls with 100% confidence on eid-complete rows and
// support >= min_support, found level-wise.
std::vector<Gdd> discover_gdds(const PseudoRelation& pr, const GraphPattern& scope,
                               const DiscoveryConfig& config, std::size_t min_support);

// Support desc, |Φ_X| asc, serialized text asc.
std::vector<Gdd> rank_rules(std::vector<Gdd> rules);

}  // namespace grapher
