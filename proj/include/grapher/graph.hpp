#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "grapher/common.hpp"

namespace grapher {

inline constexpr std::string_view kWildcard = "*";

// Attribute value kept as text, with the numeric reading cached when the text parses as one.
struct AttrValue {
  std::string text;
  std::optional<double> number;

  AttrValue() = default;
  explicit AttrValue(std::string t);

  bool operator==(const AttrValue& o) const { return text == o.text; }
};

struct Attribute {
  std::string name;
  AttrValue value;

  bool operator==(const Attribute&) const = default;
};

struct Node {
  std::string id;
  std::string label;
  std::optional<std::string> eid;
  std::vector<Attribute> attrs;

  const AttrValue* attr(std::string_view name) const;
  bool operator==(const Node&) const = default;
};

struct Edge {
  std::string src;
  std::string label;
  std::string dst;

  bool operator==(const Edge&) const = default;
};

using NodeIndex = std::uint32_t;

// One incident edge seen from a node; `outgoing` is false when the node is the edge's target.
struct Incidence {
  NodeIndex neighbor;
  std::uint32_t edge;
  bool outgoing;
};

// Directed labelled multigraph. Construction is single-writer through add_node/add_edge;
// after that the graph is treated as immutable and read concurrently.
class PropertyGraph {
 public:
  NodeIndex add_node(Node node);
  void add_edge(Edge edge);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  std::span<const Node> nodes() const { return nodes_; }
  std::span<const Edge> edges() const { return edges_; }
  const Node& node(NodeIndex i) const { return nodes_[i]; }
  const Edge& edge(std::uint32_t i) const { return edges_[i]; }

  std::optional<NodeIndex> find(std::string_view id) const;
  // Throws NotFoundError.
  NodeIndex index_of(std::string_view id) const;
  const Node& node(std::string_view id) const { return nodes_[index_of(id)]; }

  std::span<const Incidence> incident(NodeIndex i) const { return adjacency_[i]; }

  const std::map<std::string, std::set<std::string, NaturalLess>>& label_index() const {
    return label_index_;
  }
  std::vector<std::string> labels() const;
  std::size_t label_count(std::string_view label) const;

  bool operator==(const PropertyGraph& o) const;

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, NodeIndex> ids_;
  std::vector<std::vector<Incidence>> adjacency_;
  std::map<std::string, std::set<std::string, NaturalLess>> label_index_;
};

// l ≍ l'
inline bool labels_match(std::string_view a, std::string_view b) {
  return a == b || a == kWildcard || b == kWildcard;
}

PropertyGraph load_graph(std::istream& nodes, std::istream& edges);
PropertyGraph load_graph_files(const std::string& nodes_path, const std::string& edges_path);
void write_nodes_jsonl(const PropertyGraph& g, std::ostream& out);
void write_edges_jsonl(const PropertyGraph& g, std::ostream& out);

// Neighbours of `id` in either edge direction whose label matches `label` ("*" for any),
// deduplicated and in natural id order.
std::vector<std::string> neighbors_by_label(const PropertyGraph& g, std::string_view id,
                                            std::string_view label);

// ---------------------------------------------------------------------------
// Relational -> graph conversion

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

// RFC-4180: quoted fields, doubled quotes, CRLF or LF line ends, embedded newlines.
CsvTable parse_csv(std::istream& in);
void write_csv_row(std::ostream& out, std::span<const std::string> fields);

struct TableSchema {
  std::string table;
  std::string label;
  std::string id_column;
  std::vector<std::string> attr_columns;
  std::string id_prefix;
};

struct ForeignKey {
  std::string table;
  std::string column;
  std::string target_table;
  std::string edge_label;
};

struct RelationalSchemaConfig {
  std::vector<TableSchema> tables;
  std::vector<ForeignKey> foreign_keys;

  const TableSchema* table(std::string_view name) const;
  void validate() const;
};

// Key-value form:
//   table.<name>.label = <label>
//   table.<name>.id = <column>
//   table.<name>.attrs = <col>,<col>,...
//   table.<name>.id_prefix = <prefix>     (optional)
//   fk.<table>.<column> = <target table>:<edge label>
RelationalSchemaConfig parse_schema_config(std::istream& in);

PropertyGraph convert_relational(const std::map<std::string, CsvTable>& tables,
                                 const RelationalSchemaConfig& config);

}  // namespace grapher
