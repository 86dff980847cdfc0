#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "byokg/graph_store.hpp"
#include "byokg/linking.hpp"
#include "byokg/llm_client.hpp"
#include "byokg/prompts.hpp"

namespace byokg {

// --- agentic retrieval -------------------------------------------------

struct AgentOptions {
  int max_iterations = 3;
  std::size_t frontier_cap = 8;  // LLM relation-selection calls per iteration
  // How entity-selection outputs are linked back to graph ids.
  LinkOptions frontier_linking{.top_m = 1};
  const PromptLibrary* prompts = nullptr;  // null = builtin
};

struct AgentIterationTrace {
  int iteration = 0;                            // 1-based
  std::vector<std::string> frontier;            // entity ids expanded
  std::size_t candidate_triplets = 0;           // one-hop neighborhood size
  std::vector<std::string> selected_relations;  // union over frontier entities
  std::size_t kept_triplets = 0;                // after relation filtering
  std::vector<std::string> next_entity_names;   // raw selections before linking
  bool finished = false;                        // agent signalled completion
};

struct AgentResult {
  std::vector<Triplet> triplets;  // accumulated, deduplicated, discovery order
  std::vector<AgentIterationTrace> iterations;
  std::size_t llm_calls = 0;
  std::vector<std::string> warnings;
};

// Iterative neighborhood exploration: expand the frontier one hop, ask the
// model which relations matter (one call per frontier entity), keep the
// matching triplets, then ask which entities to explore next. Stops on the
// FINISH sentinel, an empty frontier, or max_iterations. Prior triplets (from
// earlier refinement rounds) seed the context shown to the model. A failed
// call is retried once; a second failure ends exploration early with the
// results so far.
AgentResult agentic_retrieve(const std::string& question, std::span<const std::string> seed_entity_ids,
                             const GraphStore& store, LlmBackend& backend, const AgentOptions& options = {},
                             std::span<const Triplet> prior_triplets = {});

// --- scoring retrieval -------------------------------------------------

struct ScoredTriplet {
  Triplet triplet;
  double score = 0.0;
};

// Embedding similarity: score(q, (h,r,t)) = cos(q,h) + cos(q,r) + cos(q,t)
// over head-name, relation-label, and tail-name embeddings. Ties break on
// the canonical (head, relation, tail) ordering. k must be positive.
std::vector<ScoredTriplet> text_retrieve(const std::string& question, int top_k, const GraphStore& store,
                                         const Embedder& embedder);

// Relevance scores for a batch of candidate texts against one query.
using Reranker = std::function<std::vector<double>(const std::string& query, const std::vector<std::string>& texts)>;

struct RerankOptions {
  int hops = 2;             // neighborhood radius around the seed entities
  int top_relations = 20;   // relation labels kept after stage one
  int prune_to = 100;       // triplets kept after stage two
  int top_k = 10;           // final result size
};

// Intermediate stages of rerank_retrieve, exposed so the funnel can be
// inspected: neighborhood -> relation filter -> pruning -> final scores.
struct FunnelTrace {
  std::vector<Triplet> neighborhood;
  std::vector<std::string> relations_kept;
  std::vector<Triplet> relation_filtered;
  std::vector<ScoredTriplet> pruned;
  std::vector<ScoredTriplet> final;
};

// Three-stage funnel: collect the L-hop neighborhood of the seeds, keep the
// top-scoring relation labels, rerank the surviving triplets, return top-k.
FunnelTrace rerank_retrieve(const std::string& question, std::span<const std::string> seed_entity_ids,
                            const GraphStore& store, const Reranker& reranker, const RerankOptions& options = {});

// Default k: large stores (over a million triplets) get 50, small ones 10.
int default_top_k(const GraphStore& store);

// Deterministic token-overlap scorer (Jaccard over word tokens); stands in
// for a neural cross-encoder.
Reranker token_overlap_reranker();

// Triplets within `hops` undirected steps of the seeds, discovery order.
std::vector<Triplet> neighborhood_triplets(const GraphStore& store, std::span<const std::string> seed_entity_ids,
                                           int hops);

}  // namespace byokg
