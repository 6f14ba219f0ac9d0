#include "grapher/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace grapher {

using ordered_json = nlohmann::ordered_json;

AttrValue::AttrValue(std::string t) : text(std::move(t)) {
  std::string_view s = trim(text);
  if (s.empty()) return;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size()) number = v;
}

const AttrValue* Node::attr(std::string_view name) const {
  for (const auto& a : attrs)
    if (a.name == name) return &a.value;
  return nullptr;
}

NodeIndex PropertyGraph::add_node(Node node) {
  if (ids_.count(node.id)) throw DataError("duplicate node id '" + node.id + "'");
  for (std::size_t i = 0; i < node.attrs.size(); ++i)
    for (std::size_t j = i + 1; j < node.attrs.size(); ++j)
      if (node.attrs[i].name == node.attrs[j].name)
        throw DataError("node '" + node.id + "' repeats attribute '" + node.attrs[i].name + "'");
  auto idx = static_cast<NodeIndex>(nodes_.size());
  ids_.emplace(node.id, idx);
  label_index_[node.label].insert(node.id);
  nodes_.push_back(std::move(node));
  adjacency_.emplace_back();
  return idx;
}

void PropertyGraph::add_edge(Edge edge) {
  auto s = find(edge.src);
  auto d = find(edge.dst);
  if (!s || !d)
    throw DataError("edge (" + edge.src + ", " + edge.label + ", " + edge.dst +
                    ") references unknown node '" + (!s ? edge.src : edge.dst) + "'");
  auto e = static_cast<std::uint32_t>(edges_.size());
  edges_.push_back(std::move(edge));
  adjacency_[*s].push_back({*d, e, true});
  if (*s != *d) adjacency_[*d].push_back({*s, e, false});
}

std::optional<NodeIndex> PropertyGraph::find(std::string_view id) const {
  auto it = ids_.find(std::string(id));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

NodeIndex PropertyGraph::index_of(std::string_view id) const {
  auto i = find(id);
  if (!i) throw NotFoundError("unknown node '" + std::string(id) + "'");
  return *i;
}

std::vector<std::string> PropertyGraph::labels() const {
  std::vector<std::string> out;
  for (const auto& [l, _] : label_index_) out.push_back(l);
  return out;
}

std::size_t PropertyGraph::label_count(std::string_view label) const {
  auto it = label_index_.find(std::string(label));
  return it == label_index_.end() ? 0 : it->second.size();
}

bool PropertyGraph::operator==(const PropertyGraph& o) const {
  return nodes_ == o.nodes_ && edges_ == o.edges_;
}

namespace {

std::string value_text(const ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  throw DataError("attribute values must be strings or numbers");
}

const ordered_json& require(const ordered_json& obj, const char* key, const char* what) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    throw DataError(std::string(what) + " is missing string field '" + key + "'");
  return *it;
}

template <typename Fn>
void for_each_record(std::istream& in, const char* source, Fn&& fn) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      auto obj = ordered_json::parse(line);
      if (!obj.is_object()) throw DataError("record is not an object");
      fn(obj);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string(source) + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const NotFoundError&) {
      throw;
    } catch (const DataError& e) {
      throw DataError(std::string(source) + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

PropertyGraph load_graph(std::istream& nodes, std::istream& edges) {
  PropertyGraph g;
  for_each_record(nodes, "nodes", [&](const ordered_json& obj) {
    Node n;
    n.id = require(obj, "id", "node").get<std::string>();
    n.label = require(obj, "label", "node").get<std::string>();
    if (auto it = obj.find("eid"); it != obj.end() && !it->is_null()) n.eid = value_text(*it);
    if (auto it = obj.find("attrs"); it != obj.end()) {
      if (!it->is_object()) throw DataError("node '" + n.id + "' attrs must be an object");
      for (const auto& [k, v] : it->items()) n.attrs.push_back({k, AttrValue(value_text(v))});
    }
    g.add_node(std::move(n));
  });
  for_each_record(edges, "edges", [&](const ordered_json& obj) {
    g.add_edge({require(obj, "src", "edge").get<std::string>(),
                require(obj, "label", "edge").get<std::string>(),
                require(obj, "dst", "edge").get<std::string>()});
  });
  return g;
}

PropertyGraph load_graph_files(const std::string& nodes_path, const std::string& edges_path) {
  std::ifstream n(nodes_path), e(edges_path);
  if (!n) throw DataError("cannot open " + nodes_path);
  if (!e) throw DataError("cannot open " + edges_path);
  return load_graph(n, e);
}

void write_nodes_jsonl(const PropertyGraph& g, std::ostream& out) {
  for (const auto& n : g.nodes()) {
    ordered_json obj;
    obj["id"] = n.id;
    obj["label"] = n.label;
    if (n.eid) obj["eid"] = *n.eid;
    ordered_json attrs = ordered_json::object();
    for (const auto& a : n.attrs) attrs[a.name] = a.value.text;
    obj["attrs"] = std::move(attrs);
    out << obj.dump() << '\n';
  }
}

void write_edges_jsonl(const PropertyGraph& g, std::ostream& out) {
  for (const auto& e : g.edges()) {
    ordered_json obj;
    obj["src"] = e.src;
    obj["label"] = e.label;
    obj["dst"] = e.dst;
    out << obj.dump() << '\n';
  }
}

std::vector<std::string> neighbors_by_label(const PropertyGraph& g, std::string_view id,
                                            std::string_view label) {
  NodeIndex v = g.index_of(id);
  std::vector<std::string> out;
  for (const auto& inc : g.incident(v)) {
    const Node& u = g.node(inc.neighbor);
    if (labels_match(u.label, label)) out.push_back(u.id);
  }
  std::sort(out.begin(), out.end(), NaturalLess{});
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

CsvTable parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false, field_started = false, any = false;
  int lineno = 1;
  char c;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
    any = false;
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++lineno;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started || !field.empty())
          throw DataError("csv line " + std::to_string(lineno) + ": stray quote");
        in_quotes = true;
        field_started = true;
        any = true;
        break;
      case ',':
        end_field();
        any = true;
        break;
      case '\r':
        if (in.peek() == '\n') break;
        [[fallthrough]];
      case '\n':
        if (any || !field.empty() || !record.empty()) end_record();
        ++lineno;
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (in_quotes) throw DataError("csv: unterminated quoted field");
  if (any || !field.empty() || !record.empty()) end_record();

  CsvTable t;
  if (records.empty()) throw DataError("csv: missing header row");
  t.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != t.header.size())
      throw DataError("csv record " + std::to_string(i + 1) + ": expected " +
                      std::to_string(t.header.size()) + " fields, got " +
                      std::to_string(records[i].size()));
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

void write_csv_row(std::ostream& out, std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    const auto& f = fields[i];
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      out << f;
      continue;
    }
    out << '"';
    for (char c : f) {
      if (c == '"') out << '"';
      out << c;
    }
    out << '"';
  }
  out << "\r\n";
}

const TableSchema* RelationalSchemaConfig::table(std::string_view name) const {
  for (const auto& t : tables)
    if (t.table == name) return &t;
  return nullptr;
}

void RelationalSchemaConfig::validate() const {
  for (const auto& t : tables) {
    if (t.label.empty()) throw ConfigError("table '" + t.table + "' has no label");
    if (t.id_column.empty()) throw ConfigError("table '" + t.table + "' has no id column");
  }
  for (const auto& fk : foreign_keys) {
    if (!table(fk.table)) throw ConfigError("foreign key on undeclared table '" + fk.table + "'");
    if (!table(fk.target_table))
      throw ConfigError("foreign key " + fk.table + "." + fk.column +
                        " targets undeclared table '" + fk.target_table + "'");
    if (fk.edge_label.empty())
      throw ConfigError("foreign key " + fk.table + "." + fk.column + " has an empty edge label");
  }
}

RelationalSchemaConfig parse_schema_config(std::istream& in) {
  RelationalSchemaConfig cfg;
  auto table_for = [&](const std::string& name) -> TableSchema& {
    for (auto& t : cfg.tables)
      if (t.table == name) return t;
    cfg.tables.push_back({name, "", "", {}, ""});
    return cfg.tables.back();
  };
  for (const auto& kv : parse_key_values(in)) {
    auto parts = split(kv.key, '.');
    auto where = "schema line " + std::to_string(kv.line);
    if (parts.size() == 3 && parts[0] == "table") {
      auto& t = table_for(parts[1]);
      if (parts[2] == "label") t.label = kv.value;
      else if (parts[2] == "id") t.id_column = kv.value;
      else if (parts[2] == "id_prefix") t.id_prefix = kv.value;
      else if (parts[2] == "attrs") {
        t.attr_columns.clear();
        if (!kv.value.empty()) t.attr_columns = split(kv.value, ',');
      } else throw ConfigError(where + ": unknown table key '" + parts[2] + "'");
    } else if (parts.size() == 3 && parts[0] == "fk") {
      auto colon = kv.value.find(':');
      if (colon == std::string::npos)
        throw ConfigError(where + ": foreign key value must be <table>:<edge label>");
      cfg.foreign_keys.push_back({parts[1], parts[2], std::string(trim(kv.value.substr(0, colon))),
                                  std::string(trim(kv.value.substr(colon + 1)))});
    } else {
      throw ConfigError(where + ": unknown key '" + kv.key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

PropertyGraph convert_relational(const std::map<std::string, CsvTable>& tables,
                                 const RelationalSchemaConfig& config) {
  config.validate();
  for (const auto& [name, _] : tables)
    if (!config.table(name)) throw ConfigError("no schema entry for table '" + name + "'");

  auto column_or_throw = [](const CsvTable& t, const std::string& table, const std::string& col) {
    auto c = t.column(col);
    if (!c) throw ConfigError("table '" + table + "' lacks declared column '" + col + "'");
    return *c;
  };

  PropertyGraph g;
  // per table: id value -> node id
  std::map<std::string, std::map<std::string, std::string>> ids;
  for (const auto& schema : config.tables) {
    auto it = tables.find(schema.table);
    if (it == tables.end()) throw ConfigError("schema declares missing table '" + schema.table + "'");
    const CsvTable& t = it->second;
    std::size_t id_col = column_or_throw(t, schema.table, schema.id_column);
    std::vector<std::size_t> attr_cols;
    for (const auto& a : schema.attr_columns) attr_cols.push_back(column_or_throw(t, schema.table, a));
    auto& table_ids = ids[schema.table];
    for (const auto& row : t.rows) {
      Node n;
      n.id = schema.id_prefix + row[id_col];
      n.label = schema.label;
      for (std::size_t k = 0; k < attr_cols.size(); ++k)
        if (!row[attr_cols[k]].empty()) n.attrs.push_back({schema.attr_columns[k], AttrValue(row[attr_cols[k]])});
      table_ids[row[id_col]] = n.id;
      g.add_node(std::move(n));
    }
  }
  std::vector<std::string> unresolved;
  for (const auto& schema : config.tables) {
    const CsvTable& t = tables.at(schema.table);
    std::size_t id_col = *t.column(schema.id_column);
    for (const auto& fk : config.foreign_keys) {
      if (fk.table != schema.table) continue;
      std::size_t col = column_or_throw(t, fk.table, fk.column);
      const auto& targets = ids[fk.target_table];
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& cell = t.rows[r][col];
        if (cell.empty()) continue;
        auto target = targets.find(cell);
        if (target == targets.end()) {
          unresolved.push_back("(" + fk.table + ", row " + std::to_string(r + 1) + ", " + fk.column +
                               " = '" + cell + "')");
          continue;
        }
        g.add_edge({schema.id_prefix + t.rows[r][id_col], fk.edge_label, target->second});
      }
    }
  }
  if (!unresolved.empty()) {
    std::string msg = "unresolvable foreign keys:";
    for (const auto& u : unresolved) msg += " " + u;
    throw DataError(msg);
  }
  return g;
}

}  // namespace grapher
