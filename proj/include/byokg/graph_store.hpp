#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace byokg {

using PropertyValue = std::variant<std::string, double, bool>;
// Ordered map so every serialization of a property bag is deterministic.
using PropertyMap = std::map<std::string, PropertyValue>;

std::string property_to_string(const PropertyValue& v);

struct Entity {
  std::string id;
  std::string name;
  std::string type;  // empty = untyped
  PropertyMap properties;
};

struct Triplet {
  std::string head;      // entity id
  std::string relation;  // relation label (timestamps already folded in)
  std::string tail;      // entity id
  auto operator<=>(const Triplet&) const = default;
};

struct Edge {
  Triplet triplet;
  PropertyMap properties;
};

struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Compact description of the graph vocabulary, rendered into prompts.
struct Schema {
  std::vector<std::string> node_types;                            // sorted, distinct, non-empty
  std::vector<std::string> relation_types;                        // sorted, distinct
  std::vector<std::array<std::string, 3>> relation_signatures;    // sorted (head type, relation, tail type)
  std::map<std::string, std::vector<std::string>> property_keys;  // label -> sorted keys

  bool empty() const;
  // Deterministic text block; "(empty schema)" for a store with no triplets.
  std::string to_text() const;
};

struct OneHopResult {
  std::vector<Triplet> triplets;         // insertion order, deduplicated
  std::vector<std::string> unknown_ids;  // inputs that resolve to no entity
};

class GraphStore {
 public:
  // Upsert by id: name/type/properties of a re-added id are merged
  // (existing non-empty fields win, missing property keys are filled in).
  const Entity& add_entity(Entity e);

  // head/tail resolution: an existing entity id wins, else an existing
  // entity name, else a fresh entity with id = name = the given string.
  // Duplicate (head, relation, tail) edges collapse into the first one
  // (missing property keys merged in). Returns the edge index.
  std::size_t add_triplet(const std::string& head, const std::string& relation, const std::string& tail,
                          PropertyMap edge_properties = {});

  const Entity* find(std::string_view id) const;
  const Entity* find_by_name(std::string_view name) const;  // first entity registered under that name

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t triplet_count() const { return edges_.size(); }

  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(std::size_t index) const { return edges_.at(index); }

  std::span<const std::size_t> out_edges(std::string_view entity_id) const;
  std::span<const std::size_t> in_edges(std::string_view entity_id) const;
  std::span<const std::size_t> edges_with_relation(std::string_view label) const;
  std::vector<std::string> relation_labels() const;  // sorted, distinct

  // Display name for an id; falls back to the id itself.
  const std::string& display_name(const std::string& entity_id) const;

  Schema schema() const;

  // All triplets touching the given entity ids (either direction),
  // deduplicated, in edge-insertion order.
  OneHopResult one_hop(std::span<const std::string> entity_ids) const;

 private:
  std::size_t intern_endpoint(const std::string& ref);

  std::vector<Entity> entities_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> by_name_;  // first registration wins
  std::unordered_map<std::string, std::vector<std::size_t>> out_;
  std::unordered_map<std::string, std::vector<std::size_t>> in_;
  std::map<std::string, std::vector<std::size_t>> by_relation_;
  std::map<Triplet, std::size_t> by_triplet_;
};

// --- ingestion -------------------------------------------------------------

struct TripleRow {
  std::string head;
  std::string relation;
  std::string tail;
  std::optional<std::string> timestamp;  // folded into the relation label
};

// Structured ingestion; throws IngestError on empty input or blank fields.
GraphStore ingest_triples(std::span<const TripleRow> rows);

// Tab-separated triples: 3 columns (head, relation, tail) or 4 with a
// trailing timestamp. '#'-prefixed lines and blank lines are skipped.
// Errors name the offending line number.
std::vector<TripleRow> parse_triples_tsv(std::string_view content);
GraphStore load_triples_tsv(const std::filesystem::path& triples,
                            const std::optional<std::filesystem::path>& entity_metadata = std::nullopt);

// Tab-separated entity metadata: (id, name, type) per line.
void apply_entity_metadata_tsv(GraphStore& store, std::string_view content);

// JSON graph with optional node/edge properties:
//   {"entities": [{"id", "name"?, "type"?, "properties"?}],
//    "triples":  [{"head", "relation", "tail", "properties"?}]}
// Also the snapshot format written by save_graph_json.
GraphStore load_graph_json(const std::filesystem::path& file);
GraphStore parse_graph_json(std::string_view content);
std::string to_graph_json(const GraphStore& store);
void save_graph_json(const GraphStore& store, const std::filesystem::path& file);

// "head -> relation -> tail" per line, entity ids mapped to display names.
// Triplets sharing (head, relation) merge their distinct tails onto the
// group's first line: "a -> r -> t1 | t2". Group and tail order follow
// first occurrence in the input.
std::string verbalize_triplets(const GraphStore& store, std::span<const Triplet> triplets);

}  // namespace byokg
