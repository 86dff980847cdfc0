#pragma once

#include <optional>
#include <string>
#include <vector>

#include "byokg/cypher.hpp"
#include "byokg/graph_store.hpp"
#include "byokg/paths.hpp"

namespace byokg {

enum class Provenance { agentic, scoring, follow, shortest, query };

std::string_view to_string(Provenance p);

struct ContextTriplet {
  Triplet triplet;
  Provenance provenance;
  std::size_t seq;  // global insertion sequence across all item kinds
};

struct ContextPath {
  GroundedPath path;
  Provenance provenance;
  std::size_t seq;
};

struct QueryRecord {
  std::string query_text;
  std::optional<cypher::ResultTable> table;  // absent on query failure
  std::optional<std::string> error_note;
  std::size_t seq;
};

// All item texts an included context item contributes, used for ranking
// metrics: triplet endpoints, path endpoints, or result cells.
struct RankedItem {
  std::size_t seq;
  std::vector<std::string> texts;
};

// The evidence accumulated across refinement iterations. Only ever grows;
// re-added triplets/paths/queries are deduplicated (by triplet value, by
// path (nodes, relations), by query text).
class RetrievalContext {
 public:
  bool add_triplet(const Triplet& t, Provenance provenance);
  bool add_path(const GroundedPath& p, Provenance provenance);
  bool add_query_record(const std::string& query_text, const cypher::QueryOutcome& outcome);

  const std::vector<ContextTriplet>& triplets() const { return triplets_; }
  const std::vector<ContextPath>& paths() const { return paths_; }
  const std::vector<QueryRecord>& query_records() const { return queries_; }

  // Plain triplet values, insertion order (the agent's prior context).
  std::vector<Triplet> triplet_values() const;

  bool empty() const { return triplets_.empty() && paths_.empty() && queries_.empty(); }
  std::size_t item_count() const { return triplets_.size() + paths_.size() + queries_.size(); }

  // Items in insertion order with the entity names / cells each contributes.
  std::vector<RankedItem> ranked_items(const GraphStore& store) const;

  // Renders triplet lines (tail-merged), then path lines, then query blocks.
  // With a token budget (whitespace-delimited tokens), items are kept by
  // class priority — query results, then grounded paths, then agent-explored
  // triplets, then similarity-scored triplets — newest first within a class;
  // an item that does not fit is skipped and smaller ones may still be
  // included. A budget of 0 means unlimited.
  std::string verbalize(const GraphStore& store, std::size_t token_budget = 0) const;

 private:
  std::vector<ContextTriplet> triplets_;
  std::vector<ContextPath> paths_;
  std::vector<QueryRecord> queries_;
  std::size_t next_seq_ = 0;
};

// One query record rendered as context lines ("query: ..." / "result: ...").
std::string render_query_record(const QueryRecord& record);

}  // namespace byokg
