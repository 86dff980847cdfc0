#include "byokg/context.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "byokg/text.hpp"

namespace byokg {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::agentic:
      return "agentic";
    case Provenance::scoring:
      return "scoring";
    case Provenance::follow:
      return "follow";
    case Provenance::shortest:
      return "shortest";
    default:
      return "query";
  }
}

bool RetrievalContext::add_triplet(const Triplet& t, Provenance provenance) {
  for (const ContextTriplet& existing : triplets_) {
    if (existing.triplet == t) return false;
  }
  triplets_.push_back(ContextTriplet{t, provenance, next_seq_++});
  return true;
}

bool RetrievalContext::add_path(const GroundedPath& p, Provenance provenance) {
  for (const ContextPath& existing : paths_) {
    if (existing.path.key() == p.key()) return false;
  }
  paths_.push_back(ContextPath{p, provenance, next_seq_++});
  return true;
}

bool RetrievalContext::add_query_record(const std::string& query_text, const cypher::QueryOutcome& outcome) {
  for (const QueryRecord& existing : queries_) {
    if (existing.query_text == query_text) return false;
  }
  QueryRecord record;
  record.query_text = query_text;
  record.seq = next_seq_++;
  if (outcome.ok()) {
    record.table = *outcome.table;
  } else {
    record.error_note = outcome.error->message;
  }
  queries_.push_back(std::move(record));
  return true;
}

std::vector<Triplet> RetrievalContext::triplet_values() const {
  std::vector<Triplet> out;
  out.reserve(triplets_.size());
  for (const ContextTriplet& t : triplets_) out.push_back(t.triplet);
  return out;
}

std::vector<RankedItem> RetrievalContext::ranked_items(const GraphStore& store) const {
  std::vector<RankedItem> items;
  items.reserve(item_count());
  for (const ContextTriplet& t : triplets_) {
    items.push_back(RankedItem{t.seq, {store.display_name(t.triplet.head), store.display_name(t.triplet.tail)}});
  }
  for (const ContextPath& p : paths_) {
    RankedItem item{p.seq, {}};
    if (!p.path.nodes.empty()) {
      item.texts.push_back(store.display_name(p.path.nodes.front()));
      if (p.path.nodes.size() > 1) item.texts.push_back(store.display_name(p.path.nodes.back()));
    }
    items.push_back(std::move(item));
  }
  for (const QueryRecord& q : queries_) {
    RankedItem item{q.seq, {}};
    if (q.table) {
      for (const auto& row : q.table->rows) {
        for (const cypher::Value& cell : row) item.texts.push_back(cell.to_string());
      }
    }
    items.push_back(std::move(item));
  }
  std::sort(items.begin(), items.end(), [](const RankedItem& a, const RankedItem& b) { return a.seq < b.seq; });
  return items;
}

std::string render_query_record(const QueryRecord& record) {
  std::string out = "query: " + record.query_text + "\n";
  if (record.error_note) {
    out += "result: error: " + *record.error_note;
  } else if (record.table->rows.empty()) {
    out += "result: none";
  } else {
    std::vector<std::string> lines;
    for (const auto& row : record.table->rows) {
      std::vector<std::string> cells;
      for (std::size_t i = 0; i < row.size(); ++i) {
        cells.push_back(record.table->columns[i] + ": " + row[i].to_string());
      }
      lines.push_back("result: " + text::join(cells, " | "));
    }
    out += text::join(lines, "\n");
  }
  return out;
}

namespace {

int class_priority(Provenance p) {
  switch (p) {
    case Provenance::query:
      return 0;  // most important
    case Provenance::follow:
    case Provenance::shortest:
      return 1;
    case Provenance::agentic:
      return 2;
    default:
      return 3;  // scoring
  }
}

}  // namespace

std::string RetrievalContext::verbalize(const GraphStore& store, std::size_t token_budget) const {
  // Which items make the cut.
  std::set<std::size_t> included;
  if (token_budget == 0) {
    for (const auto& t : triplets_) included.insert(t.seq);
    for (const auto& p : paths_) included.insert(p.seq);
    for (const auto& q : queries_) included.insert(q.seq);
  } else {
    struct Unit {
      int priority;
      std::size_t seq;
      std::size_t cost;
    };
    std::vector<Unit> units;
    for (const auto& t : triplets_) {
      std::string line = store.display_name(t.triplet.head) + " -> " + t.triplet.relation + " -> " +
                         store.display_name(t.triplet.tail);
      units.push_back({class_priority(t.provenance), t.seq, text::count_tokens(line)});
    }
    for (const auto& p : paths_) {
      units.push_back(
          {class_priority(p.provenance), p.seq, text::count_tokens(verbalize_paths(store, {&p.path, 1}))});
    }
    for (const auto& q : queries_) {
      units.push_back({class_priority(Provenance::query), q.seq, text::count_tokens(render_query_record(q))});
    }
    std::sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) {
      if (a.priority != b.priority) return a.priority < b.priority;
      return a.seq > b.seq;  // newest first within a class
    });
    std::size_t used = 0;
    for (const Unit& u : units) {
      if (used + u.cost > token_budget) continue;  // skip, keep trying smaller items
      used += u.cost;
      included.insert(u.seq);
    }
  }

  // Render included items in canonical order.
  std::vector<Triplet> kept_triplets;
  for (const auto& t : triplets_) {
    if (included.count(t.seq)) kept_triplets.push_back(t.triplet);
  }
  std::vector<GroundedPath> kept_paths;
  for (const auto& p : paths_) {
    if (included.count(p.seq)) kept_paths.push_back(p.path);
  }
  std::vector<std::string> sections;
  if (!kept_triplets.empty()) sections.push_back(verbalize_triplets(store, kept_triplets));
  if (!kept_paths.empty()) sections.push_back(verbalize_paths(store, kept_paths));
  for (const auto& q : queries_) {
    if (included.count(q.seq)) sections.push_back(render_query_record(q));
  }
  return text::join(sections, "\n");
}

}  // namespace byokg
