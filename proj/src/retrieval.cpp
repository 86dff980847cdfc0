#include "byokg/retrieval.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "byokg/kg_linker.hpp"
#include "byokg/text.hpp"

namespace byokg {

// --- agentic retrieval -------------------------------------------------

namespace {

constexpr std::string_view kFinishSentinel = "FINISH";

// complete() with one retry on transport failure; nullopt when both fail.
std::optional<std::string> call_with_retry(LlmBackend& backend, const LlmRequest& request,
                                           std::vector<std::string>& warnings) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      return backend.complete(request);
    } catch (const TransportError& e) {
      if (attempt == 1) {
        warnings.push_back(std::string("giving up after retry: ") + e.what());
        return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

}  // namespace

AgentResult agentic_retrieve(const std::string& question, std::span<const std::string> seed_entity_ids,
                             const GraphStore& store, LlmBackend& backend, const AgentOptions& options,
                             std::span<const Triplet> prior_triplets) {
  AgentResult result;
  const PromptLibrary& lib = options.prompts ? *options.prompts : PromptLibrary::builtin();
  std::size_t calls_before = backend.call_log().size();

  std::vector<std::string> frontier;
  std::set<std::string> frontier_seen;
  for (const std::string& id : seed_entity_ids) {
    if (store.find(id) == nullptr) {
      result.warnings.push_back("seed entity \"" + id + "\" is not in the graph");
      continue;
    }
    if (frontier_seen.insert(id).second) frontier.push_back(id);
  }

  std::set<Triplet> accumulated_set;
  // Earlier-round triplets shape the context but are not re-emitted.
  std::vector<Triplet> context_triplets(prior_triplets.begin(), prior_triplets.end());
  for (const Triplet& t : prior_triplets) accumulated_set.insert(t);

  for (int iteration = 1; iteration <= options.max_iterations && !frontier.empty(); ++iteration) {
    AgentIterationTrace trace;
    trace.iteration = iteration;
    if (frontier.size() > options.frontier_cap) {
      result.warnings.push_back("iteration " + std::to_string(iteration) + ": frontier truncated to " +
                                std::to_string(options.frontier_cap) + " entities");
      frontier.resize(options.frontier_cap);
    }
    trace.frontier = frontier;

    OneHopResult hop = store.one_hop(frontier);
    trace.candidate_triplets = hop.triplets.size();
    if (hop.triplets.empty()) {
      result.iterations.push_back(std::move(trace));
      break;
    }

    // One relation-selection call per frontier entity.
    std::vector<std::string> selected_labels;          // original labels, first-selection order
    std::set<std::string> selected_nfc;                // NFC forms for filtering
    bool aborted = false;
    for (const std::string& entity_id : frontier) {
      std::map<std::string, std::string> candidate_by_nfc;  // nfc -> original label
      for (const Triplet& t : hop.triplets) {
        if (t.head == entity_id || t.tail == entity_id) {
          candidate_by_nfc.emplace(text::nfc(t.relation), t.relation);
        }
      }
      if (candidate_by_nfc.empty()) continue;
      std::vector<std::string> candidate_labels;
      for (const auto& [_, label] : candidate_by_nfc) candidate_labels.push_back(label);
      std::sort(candidate_labels.begin(), candidate_labels.end());

      std::string prompt = fill_template(lib.get("relation_selection"),
                                         {{"question", question},
                                          {"entity", store.display_name(entity_id)},
                                          {"relations", text::join(candidate_labels, "\n")}});
      std::optional<std::string> response =
          call_with_retry(backend, LlmRequest{prompt, "agent.relations"}, result.warnings);
      if (!response) {
        aborted = true;
        break;
      }
      std::optional<std::string> block = extract_tag_block(*response, "selected");
      if (!block) block = extract_tag_block(*response, "select");
      std::vector<std::string> picks;
      if (block) {
        for (const std::string& raw : text::split_lines(*block)) {
          std::string line = text::trim(raw);
          if (line.empty()) continue;
          auto it = candidate_by_nfc.find(text::nfc(line));
          if (it != candidate_by_nfc.end()) picks.push_back(it->second);
        }
      }
      if (picks.empty()) {
        // Fail open: an unparseable or off-list selection keeps everything.
        result.warnings.push_back("iteration " + std::to_string(iteration) + ": relation selection for \"" +
                                  store.display_name(entity_id) + "\" was unusable; keeping all candidates");
        picks = candidate_labels;
      }
      for (const std::string& label : picks) {
        if (selected_nfc.insert(text::nfc(label)).second) selected_labels.push_back(label);
      }
    }
    if (aborted) {
      result.iterations.push_back(std::move(trace));
      break;
    }
    trace.selected_relations = selected_labels;

    std::vector<Triplet> kept;
    for (const Triplet& t : hop.triplets) {
      if (selected_nfc.count(text::nfc(t.relation))) kept.push_back(t);
    }
    trace.kept_triplets = kept.size();
    for (const Triplet& t : kept) {
      if (accumulated_set.insert(t).second) {
        context_triplets.push_back(t);
        result.triplets.push_back(t);
      }
    }

    // Entity selection over the accumulated context.
    std::string context_text = verbalize_triplets(store, context_triplets);
    std::string prompt = fill_template(lib.get("entity_selection"), {{"question", question},
                                                                     {"context", context_text}});
    std::optional<std::string> response =
        call_with_retry(backend, LlmRequest{prompt, "agent.entities"}, result.warnings);
    if (!response) {
      result.iterations.push_back(std::move(trace));
      break;
    }
    std::vector<std::string> names;
    if (auto block = extract_tag_block(*response, "next-entities")) {
      for (const std::string& raw : text::split_lines(*block)) {
        std::string line = text::trim(raw);
        if (line.empty()) continue;
        if (line == kFinishSentinel) {
          trace.finished = true;
          continue;
        }
        names.push_back(std::move(line));
      }
    } else {
      result.warnings.push_back("iteration " + std::to_string(iteration) +
                                ": entity selection response had no <next-entities> block");
    }
    trace.next_entity_names = names;
    bool finished = trace.finished;

    std::vector<std::string> next;
    if (!finished) {
      std::vector<Mention> mentions;
      mentions.reserve(names.size());
      for (const std::string& name : names) mentions.push_back(Mention{name, MentionSource::extracted});
      std::vector<LinkedEntity> linked = link_mentions(mentions, store, options.frontier_linking);
      std::set<std::string> next_seen;
      for (const LinkedEntity& le : linked) {
        if (next_seen.insert(le.entity_id).second) next.push_back(le.entity_id);
      }
      for (const std::string& name : names) {
        bool found = std::any_of(linked.begin(), linked.end(),
                                 [&](const LinkedEntity& le) { return le.mention.text == name; });
        if (!found) {
          result.warnings.push_back("iteration " + std::to_string(iteration) + ": could not link \"" + name +
                                    "\" to any entity");
        }
      }
    }
    result.iterations.push_back(std::move(trace));
    if (finished) break;
    frontier = std::move(next);
  }

  result.llm_calls = backend.call_log().size() - calls_before;
  return result;
}

// --- scoring retrieval -------------------------------------------------

namespace {

bool scored_less(const ScoredTriplet& a, const ScoredTriplet& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.triplet < b.triplet;
}

}  // namespace

std::vector<ScoredTriplet> text_retrieve(const std::string& question, int top_k, const GraphStore& store,
                                         const Embedder& embedder) {
  if (top_k <= 0) throw std::invalid_argument("text_retrieve: top_k must be positive");
  if (!embedder) throw std::invalid_argument("text_retrieve: no embedder provided");

  // Embed the question plus every distinct surface text in one batch.
  std::vector<std::string> texts{question};
  std::map<std::string, std::size_t> slot;
  auto intern = [&](const std::string& s) {
    auto [it, inserted] = slot.emplace(s, texts.size());
    if (inserted) texts.push_back(s);
    return it->second;
  };
  for (const Edge& e : store.edges()) {
    intern(store.display_name(e.triplet.head));
    intern(e.triplet.relation);
    intern(store.display_name(e.triplet.tail));
  }
  std::vector<std::vector<double>> vectors = embedder(texts);
  if (vectors.size() != texts.size()) {
    throw std::invalid_argument("text_retrieve: embedder returned " + std::to_string(vectors.size()) +
                                " vectors for " + std::to_string(texts.size()) + " texts");
  }
  for (auto& v : vectors) l2_normalize(v);

  const std::vector<double>& q = vectors[0];
  std::vector<ScoredTriplet> scored;
  scored.reserve(store.edges().size());
  for (const Edge& e : store.edges()) {
    double score = cosine(q, vectors[slot.at(store.display_name(e.triplet.head))]) +
                   cosine(q, vectors[slot.at(e.triplet.relation)]) +
                   cosine(q, vectors[slot.at(store.display_name(e.triplet.tail))]);
    scored.push_back(ScoredTriplet{e.triplet, score});
  }
  std::sort(scored.begin(), scored.end(), scored_less);
  if (scored.size() > static_cast<std::size_t>(top_k)) scored.resize(top_k);
  return scored;
}

std::vector<Triplet> neighborhood_triplets(const GraphStore& store, std::span<const std::string> seed_entity_ids,
                                           int hops) {
  std::vector<Triplet> result;
  std::set<std::size_t> seen_edges;
  std::set<std::string> visited;
  std::vector<std::string> frontier;
  for (const std::string& id : seed_entity_ids) {
    if (store.find(id) != nullptr && visited.insert(id).second) frontier.push_back(id);
  }
  for (int hop = 0; hop < hops && !frontier.empty(); ++hop) {
    std::vector<std::size_t> edge_indices;
    for (const std::string& id : frontier) {
      for (std::size_t idx : store.out_edges(id)) edge_indices.push_back(idx);
      for (std::size_t idx : store.in_edges(id)) edge_indices.push_back(idx);
    }
    std::sort(edge_indices.begin(), edge_indices.end());
    std::vector<std::string> next;
    for (std::size_t idx : edge_indices) {
      if (!seen_edges.insert(idx).second) continue;
      const Triplet& t = store.edge(idx).triplet;
      result.push_back(t);
      if (visited.insert(t.head).second) next.push_back(t.head);
      if (visited.insert(t.tail).second) next.push_back(t.tail);
    }
    frontier = std::move(next);
  }
  return result;
}

int default_top_k(const GraphStore& store) { return store.triplet_count() > 1000000 ? 50 : 10; }

Reranker token_overlap_reranker() {
  return [](const std::string& query, const std::vector<std::string>& texts) {
    std::set<std::string> q_tokens;
    for (auto& t : text::word_tokens(query)) q_tokens.insert(t);
    std::vector<double> scores;
    scores.reserve(texts.size());
    for (const std::string& candidate : texts) {
      std::set<std::string> c_tokens;
      for (auto& t : text::word_tokens(candidate)) c_tokens.insert(t);
      std::vector<std::string> shared;
      std::set_intersection(q_tokens.begin(), q_tokens.end(), c_tokens.begin(), c_tokens.end(),
                            std::back_inserter(shared));
      std::size_t uni = q_tokens.size() + c_tokens.size() - shared.size();
      scores.push_back(uni == 0 ? 0.0 : static_cast<double>(shared.size()) / static_cast<double>(uni));
    }
    return scores;
  };
}

FunnelTrace rerank_retrieve(const std::string& question, std::span<const std::string> seed_entity_ids,
                            const GraphStore& store, const Reranker& reranker, const RerankOptions& options) {
  if (options.top_k <= 0) throw std::invalid_argument("rerank_retrieve: top_k must be positive");
  if (!reranker) throw std::invalid_argument("rerank_retrieve: no reranker provided");
  FunnelTrace trace;
  trace.neighborhood = neighborhood_triplets(store, seed_entity_ids, options.hops);
  if (trace.neighborhood.empty()) return trace;

  // Stage one: keep the most relevant relation labels.
  std::vector<std::string> labels;
  std::set<std::string> label_seen;
  for (const Triplet& t : trace.neighborhood) {
    if (label_seen.insert(t.relation).second) labels.push_back(t.relation);
  }
  std::vector<double> label_scores = reranker(question, labels);
  if (label_scores.size() != labels.size()) {
    throw std::invalid_argument("rerank_retrieve: reranker returned a mismatched score count for relations");
  }
  std::vector<std::size_t> label_order(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) label_order[i] = i;
  std::sort(label_order.begin(), label_order.end(), [&](std::size_t a, std::size_t b) {
    if (label_scores[a] != label_scores[b]) return label_scores[a] > label_scores[b];
    return labels[a] < labels[b];
  });
  std::size_t keep_relations = std::min<std::size_t>(options.top_relations, labels.size());
  std::set<std::string> kept_labels;
  for (std::size_t i = 0; i < keep_relations; ++i) {
    trace.relations_kept.push_back(labels[label_order[i]]);
    kept_labels.insert(labels[label_order[i]]);
  }

  // Stage two: restrict the neighborhood to those relations.
  for (const Triplet& t : trace.neighborhood) {
    if (kept_labels.count(t.relation)) trace.relation_filtered.push_back(t);
  }

  // Stage three: score the surviving triplets once; prune, then final top-k.
  std::vector<std::string> rendered;
  rendered.reserve(trace.relation_filtered.size());
  for (const Triplet& t : trace.relation_filtered) {
    rendered.push_back(store.display_name(t.head) + " -> " + t.relation + " -> " + store.display_name(t.tail));
  }
  std::vector<double> scores = reranker(question, rendered);
  if (scores.size() != rendered.size()) {
    throw std::invalid_argument("rerank_retrieve: reranker returned a mismatched score count for triplets");
  }
  std::vector<ScoredTriplet> scored;
  scored.reserve(trace.relation_filtered.size());
  for (std::size_t i = 0; i < trace.relation_filtered.size(); ++i) {
    scored.push_back(ScoredTriplet{trace.relation_filtered[i], scores[i]});
  }
  std::sort(scored.begin(), scored.end(), scored_less);
  std::size_t prune = std::min<std::size_t>(options.prune_to, scored.size());
  trace.pruned.assign(scored.begin(), scored.begin() + prune);
  std::size_t final_k = std::min<std::size_t>(options.top_k, trace.pruned.size());
  trace.final.assign(trace.pruned.begin(), trace.pruned.begin() + final_k);
  return trace;
}

}  // namespace byokg
