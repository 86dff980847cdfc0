#include "byokg/graph_store.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "byokg/text.hpp"

namespace byokg {

using nlohmann::json;

namespace {

std::string format_double(double d) {
  if (d == static_cast<long long>(d) && std::abs(d) < 1e15) {
    return std::to_string(static_cast<long long>(d));
  }
  std::ostringstream os;
  os.precision(15);
  os << d;
  return os.str();
}

}  // namespace

std::string property_to_string(const PropertyValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
  return std::get<bool>(v) ? "true" : "false";
}

bool Schema::empty() const {
  return node_types.empty() && relation_types.empty() && relation_signatures.empty() && property_keys.empty();
}

std::string Schema::to_text() const {
  if (empty()) return "(empty schema)";
  std::string out;
  if (!node_types.empty()) {
    out += "Node types:\n";
    for (const auto& t : node_types) out += "  " + t + "\n";
  }
  if (!relation_types.empty()) {
    out += "Relation types:\n";
    for (const auto& r : relation_types) out += "  " + r + "\n";
  }
  if (!relation_signatures.empty()) {
    out += "Relation signatures:\n";
    for (const auto& sig : relation_signatures) {
      out += "  (" + sig[0] + ")-[" + sig[1] + "]->(" + sig[2] + ")\n";
    }
  }
  if (!property_keys.empty()) {
    out += "Properties:\n";
    for (const auto& [label, keys] : property_keys) {
      out += "  " + label + ": " + text::join(keys, ", ") + "\n";
    }
  }
  if (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

const Entity& GraphStore::add_entity(Entity e) {
  if (e.id.empty()) throw IngestError("entity with empty id");
  if (e.name.empty()) e.name = e.id;
  auto it = by_id_.find(e.id);
  if (it != by_id_.end()) {
    Entity& existing = entities_[it->second];
    if (existing.type.empty()) existing.type = e.type;
    if (existing.name == existing.id && e.name != e.id) {
      // Metadata arrived after the id was first seen bare in a triple.
      if (by_name_.find(e.name) == by_name_.end()) by_name_[e.name] = it->second;
      existing.name = e.name;
    }
    for (auto& [k, v] : e.properties) existing.properties.emplace(k, v);
    return existing;
  }
  std::size_t idx = entities_.size();
  by_id_[e.id] = idx;
  by_name_.emplace(e.name, idx);
  entities_.push_back(std::move(e));
  return entities_[idx];
}

std::size_t GraphStore::intern_endpoint(const std::string& ref) {
  auto it = by_id_.find(ref);
  if (it != by_id_.end()) return it->second;
  auto nt = by_name_.find(ref);
  if (nt != by_name_.end()) return nt->second;
  std::size_t idx = entities_.size();
  by_id_[ref] = idx;
  by_name_.emplace(ref, idx);
  entities_.push_back(Entity{ref, ref, "", {}});
  return idx;
}

std::size_t GraphStore::add_triplet(const std::string& head, const std::string& relation, const std::string& tail,
                                    PropertyMap edge_properties) {
  if (head.empty() || relation.empty() || tail.empty()) {
    throw IngestError("triplet with empty field (head='" + head + "', relation='" + relation + "', tail='" + tail +
                      "')");
  }
  std::size_t h = intern_endpoint(head);
  std::size_t t = intern_endpoint(tail);
  Triplet trip{entities_[h].id, relation, entities_[t].id};
  auto existing = by_triplet_.find(trip);
  if (existing != by_triplet_.end()) {
    Edge& e = edges_[existing->second];
    for (auto& [k, v] : edge_properties) e.properties.emplace(k, v);
    return existing->second;
  }
  std::size_t idx = edges_.size();
  by_triplet_[trip] = idx;
  out_[trip.head].push_back(idx);
  in_[trip.tail].push_back(idx);
  by_relation_[relation].push_back(idx);
  edges_.push_back(Edge{std::move(trip), std::move(edge_properties)});
  return idx;
}

const Entity* GraphStore::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &entities_[it->second];
}

const Entity* GraphStore::find_by_name(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? nullptr : &entities_[it->second];
}

namespace {
const std::vector<std::size_t> kNoEdges;
}

std::span<const std::size_t> GraphStore::out_edges(std::string_view entity_id) const {
  auto it = out_.find(std::string(entity_id));
  return it == out_.end() ? std::span<const std::size_t>(kNoEdges) : std::span<const std::size_t>(it->second);
}

std::span<const std::size_t> GraphStore::in_edges(std::string_view entity_id) const {
  auto it = in_.find(std::string(entity_id));
  return it == in_.end() ? std::span<const std::size_t>(kNoEdges) : std::span<const std::size_t>(it->second);
}

std::span<const std::size_t> GraphStore::edges_with_relation(std::string_view label) const {
  auto it = by_relation_.find(std::string(label));
  return it == by_relation_.end() ? std::span<const std::size_t>(kNoEdges) : std::span<const std::size_t>(it->second);
}

std::vector<std::string> GraphStore::relation_labels() const {
  std::vector<std::string> labels;
  labels.reserve(by_relation_.size());
  for (const auto& [label, _] : by_relation_) labels.push_back(label);
  return labels;
}

const std::string& GraphStore::display_name(const std::string& entity_id) const {
  const Entity* e = find(entity_id);
  return e ? e->name : entity_id;
}

Schema GraphStore::schema() const {
  Schema s;
  std::set<std::string> types;
  for (const auto& e : entities_) {
    if (!e.type.empty()) types.insert(e.type);
  }
  s.node_types.assign(types.begin(), types.end());
  for (const auto& [label, _] : by_relation_) s.relation_types.push_back(label);
  std::set<std::array<std::string, 3>> sigs;
  for (const auto& e : edges_) {
    const Entity* h = find(e.triplet.head);
    const Entity* t = find(e.triplet.tail);
    std::string ht = h ? h->type : "";
    std::string tt = t ? t->type : "";
    if (!ht.empty() || !tt.empty()) sigs.insert({ht, e.triplet.relation, tt});
  }
  s.relation_signatures.assign(sigs.begin(), sigs.end());
  std::map<std::string, std::set<std::string>> props;
  for (const auto& e : entities_) {
    if (e.properties.empty()) continue;
    std::string label = e.type.empty() ? "(untyped)" : e.type;
    for (const auto& [k, _] : e.properties) props[label].insert(k);
  }
  for (const auto& e : edges_) {
    for (const auto& [k, _] : e.properties) props[e.triplet.relation].insert(k);
  }
  for (const auto& [label, keys] : props) {
    s.property_keys[label] = std::vector<std::string>(keys.begin(), keys.end());
  }
  return s;
}

OneHopResult GraphStore::one_hop(std::span<const std::string> entity_ids) const {
  OneHopResult result;
  std::set<std::size_t> indices;
  std::set<std::string> seen_unknown;
  for (const auto& id : entity_ids) {
    if (by_id_.find(id) == by_id_.end()) {
      if (seen_unknown.insert(id).second) result.unknown_ids.push_back(id);
      continue;
    }
    for (std::size_t idx : out_edges(id)) indices.insert(idx);
    for (std::size_t idx : in_edges(id)) indices.insert(idx);
  }
  result.triplets.reserve(indices.size());
  for (std::size_t idx : indices) result.triplets.push_back(edges_[idx].triplet);
  return result;
}

// --- ingestion -------------------------------------------------------------

namespace {

std::string fold_timestamp(const std::string& relation, const std::optional<std::string>& ts) {
  if (!ts) return relation;
  std::string trimmed = text::trim(*ts);
  if (trimmed.empty()) return relation;
  return relation + ": " + trimmed;
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      fields.emplace_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

}  // namespace

GraphStore ingest_triples(std::span<const TripleRow> rows) {
  if (rows.empty()) throw IngestError("empty input: no triple rows");
  GraphStore store;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TripleRow& row = rows[i];
    if (row.head.empty() || row.relation.empty() || row.tail.empty()) {
      throw IngestError("row " + std::to_string(i + 1) + " has an empty field");
    }
    store.add_triplet(row.head, fold_timestamp(row.relation, row.timestamp), row.tail);
  }
  return store;
}

std::vector<TripleRow> parse_triples_tsv(std::string_view content) {
  std::vector<TripleRow> rows;
  std::size_t line_no = 0;
  for (const std::string& raw : text::split_lines(content)) {
    ++line_no;
    std::string line = text::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields = split_tabs(raw);
    // Trailing '\r' already stripped by split_lines; trim cell whitespace.
    for (auto& f : fields) f = text::trim(f);
    while (!fields.empty() && fields.back().empty()) fields.pop_back();
    if (fields.size() < 3) {
      throw IngestError("line " + std::to_string(line_no) + ": expected 3 or 4 tab-separated fields, got " +
                        std::to_string(fields.size()));
    }
    if (fields.size() > 4) {
      throw IngestError("line " + std::to_string(line_no) + ": expected 3 or 4 tab-separated fields, got " +
                        std::to_string(fields.size()));
    }
    TripleRow row{fields[0], fields[1], fields[2], std::nullopt};
    if (fields.size() == 4) row.timestamp = fields[3];
    if (row.head.empty() || row.relation.empty() || row.tail.empty()) {
      throw IngestError("line " + std::to_string(line_no) + " has an empty field");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void apply_entity_metadata_tsv(GraphStore& store, std::string_view content) {
  std::size_t line_no = 0;
  for (const std::string& raw : text::split_lines(content)) {
    ++line_no;
    std::string line = text::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields = split_tabs(raw);
    for (auto& f : fields) f = text::trim(f);
    while (!fields.empty() && fields.back().empty()) fields.pop_back();
    if (fields.size() != 3) {
      throw IngestError("metadata line " + std::to_string(line_no) + ": expected 3 tab-separated fields (id, name, type), got " +
                        std::to_string(fields.size()));
    }
    store.add_entity(Entity{fields[0], fields[1], fields[2], {}});
  }
}

namespace {

std::string read_file_or_throw(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IngestError("cannot open file: " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

GraphStore load_triples_tsv(const std::filesystem::path& triples,
                            const std::optional<std::filesystem::path>& entity_metadata) {
  GraphStore store;
  if (entity_metadata) {
    apply_entity_metadata_tsv(store, read_file_or_throw(*entity_metadata));
  }
  std::vector<TripleRow> rows = parse_triples_tsv(read_file_or_throw(triples));
  if (rows.empty()) throw IngestError("empty input: " + triples.string() + " contains no triple rows");
  for (const auto& row : rows) {
    store.add_triplet(row.head, fold_timestamp(row.relation, row.timestamp), row.tail);
  }
  return store;
}

namespace {

PropertyMap parse_properties(const json& j, const std::string& where) {
  PropertyMap props;
  if (!j.is_object()) throw IngestError(where + ": \"properties\" must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const json& v = it.value();
    if (v.is_string()) {
      props[it.key()] = v.get<std::string>();
    } else if (v.is_number()) {
      props[it.key()] = v.get<double>();
    } else if (v.is_boolean()) {
      props[it.key()] = v.get<bool>();
    } else if (v.is_null()) {
      continue;  // absent property
    } else {
      throw IngestError(where + ": property \"" + it.key() + "\" must be a string, number, or boolean");
    }
  }
  return props;
}

}  // namespace

GraphStore parse_graph_json(std::string_view content) {
  json doc = json::parse(content, nullptr, false);
  if (doc.is_discarded()) throw IngestError("graph JSON is not valid JSON");
  if (!doc.is_object()) throw IngestError("graph JSON root must be an object");
  GraphStore store;
  if (doc.contains("entities")) {
    std::size_t i = 0;
    for (const json& e : doc["entities"]) {
      ++i;
      std::string where = "entity " + std::to_string(i);
      if (!e.is_object() || !e.contains("id")) throw IngestError(where + ": missing \"id\"");
      Entity ent;
      ent.id = e["id"].get<std::string>();
      ent.name = e.value("name", ent.id);
      ent.type = e.value("type", std::string{});
      if (e.contains("properties")) ent.properties = parse_properties(e["properties"], where);
      store.add_entity(std::move(ent));
    }
  }
  if (doc.contains("triples")) {
    std::size_t i = 0;
    for (const json& t : doc["triples"]) {
      ++i;
      std::string where = "triple " + std::to_string(i);
      if (!t.is_object() || !t.contains("head") || !t.contains("relation") || !t.contains("tail")) {
        throw IngestError(where + ": must have \"head\", \"relation\", and \"tail\"");
      }
      PropertyMap props;
      if (t.contains("properties")) props = parse_properties(t["properties"], where);
      store.add_triplet(t["head"].get<std::string>(), t["relation"].get<std::string>(), t["tail"].get<std::string>(),
                        std::move(props));
    }
  }
  if (store.entity_count() == 0 && store.triplet_count() == 0) {
    throw IngestError("empty input: graph JSON declares no entities or triples");
  }
  return store;
}

GraphStore load_graph_json(const std::filesystem::path& file) { return parse_graph_json(read_file_or_throw(file)); }

namespace {

json properties_to_json(const PropertyMap& props) {
  json j = json::object();
  for (const auto& [k, v] : props) {
    if (const auto* s = std::get_if<std::string>(&v)) {
      j[k] = *s;
    } else if (const auto* d = std::get_if<double>(&v)) {
      j[k] = *d;
    } else {
      j[k] = std::get<bool>(v);
    }
  }
  return j;
}

}  // namespace

std::string to_graph_json(const GraphStore& store) {
  json doc;
  doc["entities"] = json::array();
  for (const Entity& e : store.entities()) {
    json je{{"id", e.id}};
    if (e.name != e.id) je["name"] = e.name;
    if (!e.type.empty()) je["type"] = e.type;
    if (!e.properties.empty()) je["properties"] = properties_to_json(e.properties);
    doc["entities"].push_back(std::move(je));
  }
  doc["triples"] = json::array();
  for (const Edge& e : store.edges()) {
    json jt{{"head", e.triplet.head}, {"relation", e.triplet.relation}, {"tail", e.triplet.tail}};
    if (!e.properties.empty()) jt["properties"] = properties_to_json(e.properties);
    doc["triples"].push_back(std::move(jt));
  }
  return doc.dump(2);
}

void save_graph_json(const GraphStore& store, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IngestError("cannot write file: " + file.string());
  out << to_graph_json(store) << '\n';
}

std::string verbalize_triplets(const GraphStore& store, std::span<const Triplet> triplets) {
  // Group by (head, relation) at first occurrence; merge distinct tails.
  std::vector<std::pair<std::pair<std::string, std::string>, std::vector<std::string>>> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> group_index;
  for (const Triplet& t : triplets) {
    std::pair<std::string, std::string> key{t.head, t.relation};
    auto it = group_index.find(key);
    std::size_t idx;
    if (it == group_index.end()) {
      idx = groups.size();
      group_index[key] = idx;
      groups.push_back({key, {}});
    } else {
      idx = it->second;
    }
    std::string tail_name = store.display_name(t.tail);
    auto& tails = groups[idx].second;
    if (std::find(tails.begin(), tails.end(), tail_name) == tails.end()) tails.push_back(tail_name);
  }
  std::string out;
  for (const auto& [key, tails] : groups) {
    out += store.display_name(key.first) + " -> " + key.second + " -> " + text::join(tails, " | ") + "\n";
  }
  if (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

}  // namespace byokg
