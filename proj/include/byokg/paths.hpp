#pragma once

#include <span>
#include <string>
#include <vector>

#include "byokg/graph_store.hpp"

namespace byokg {

struct RelationPath {
  std::vector<std::string> relations;
  bool operator==(const RelationPath&) const = default;
};

enum class HopDirection { forward, inverse };

struct GroundedPath {
  std::vector<std::string> nodes;        // entity ids, relations.size() + 1 of them
  std::vector<std::string> relations;    // labels, may repeat
  std::vector<HopDirection> directions;  // one per hop

  // Identity for deduplication ignores hop directions.
  std::pair<std::vector<std::string>, std::vector<std::string>> key() const { return {nodes, relations}; }
  bool operator==(const GroundedPath&) const = default;
};

struct FollowOptions {
  // Max grounded walks per (source, relation path) pair before truncation.
  std::size_t per_source_cap = 256;
};

struct FollowResult {
  std::vector<GroundedPath> paths;  // deduplicated by (nodes, relations)
  std::vector<std::string> warnings;
  bool cap_hit = false;
};

// Grounds each relation chain starting from each source entity, following
// every hop's label in both edge directions. Labels compare equal after NFC
// normalization. Unknown sources and unmatchable chains yield no paths.
FollowResult follow_paths(std::span<const RelationPath> relation_paths, std::span<const std::string> source_ids,
                          const GraphStore& store, const FollowOptions& options = {});

// Breadth-first shortest paths between every (source, target) pair, treating
// edges as undirected with unit weight. Pairs farther than max_hops apart are
// skipped. Among equal-length paths the lexicographically smallest node
// sequence wins; edge label ties prefer the smaller label, then the forward
// direction. source == target yields a single-node, zero-hop path.
std::vector<GroundedPath> shortest_paths(std::span<const std::string> source_ids,
                                         std::span<const std::string> target_ids, const GraphStore& store,
                                         int max_hops = 4);

// One line per path: entities and relations joined with " -> ", ids mapped
// to display names. A zero-hop path renders as its single entity name.
std::string verbalize_paths(const GraphStore& store, std::span<const GroundedPath> paths);

}  // namespace byokg
