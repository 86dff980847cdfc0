#pragma once

#include <json.hpp>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "byokg/context.hpp"
#include "byokg/graph_store.hpp"
#include "byokg/kg_linker.hpp"
#include "byokg/linking.hpp"
#include "byokg/llm_client.hpp"
#include "byokg/retrieval.hpp"

namespace byokg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ScoringMethod { text, rerank };

struct PipelineConfig {
  int refinement_iterations = 2;       // artifact-generation rounds
  int agent_iterations = 3;            // exploration steps per round
  std::size_t frontier_cap = 8;        // agent frontier size limit
  int link_top_m = 3;                  // candidates kept per mention
  LinkMode link_mode = LinkMode::string_match;
  double string_score_floor = 0.4;
  int top_k = 0;                       // 0 = derive from store size
  ScoringMethod scoring_method = ScoringMethod::text;
  int rerank_hops = 2;
  int rerank_top_relations = 20;
  int rerank_prune_to = 100;
  int max_hops = 4;                    // shortest-path search radius
  std::size_t context_token_budget = 8000;  // 0 = unlimited
  std::string query_language = "openCypher";
  bool per_task_calls = false;
  bool enable_paths = true;
  bool enable_query = true;
  bool enable_agentic = true;
  bool enable_scoring = true;

  void validate() const;  // throws ConfigError naming the offending field
  nlohmann::json to_json() const;
  // Strict: unknown keys are rejected so config-file typos surface early.
  static PipelineConfig from_json(const nlohmann::json& j);
};

// Ordered JSON events describing one pipeline run. Contains no timestamps,
// so identical inputs reproduce identical traces byte for byte.
struct PipelineTrace {
  std::vector<nlohmann::json> events;

  void emit(nlohmann::json event) { events.push_back(std::move(event)); }
  std::string to_jsonl() const;  // one compact JSON object per line
};

// Number of LLM invocations a trace records (retries included).
std::size_t call_budget_used(const PipelineTrace& trace);

struct PipelineResult {
  std::vector<std::string> answers;
  std::vector<std::string> first_draft_answers;  // round-one direct answers
  RetrievalContext context;
  PipelineTrace trace;
  std::optional<std::string> error;  // set when the run could not finish

  bool ok() const { return !error.has_value(); }
};

// Optional dependency overrides; defaults are the deterministic local
// embedder/reranker and the builtin prompt set.
struct PipelineTools {
  Embedder embedder;                       // default: hashing_embedder(64)
  Reranker reranker;                       // default: token_overlap_reranker()
  const EmbeddingIndex* link_index = nullptr;  // else built on demand
  const PromptLibrary* prompts = nullptr;      // null = builtin
};

// Runs the full loop: generate artifacts, link them to the graph, retrieve
// along every enabled strategy, accumulate context, repeat, then produce the
// final answers from the accumulated evidence.
class Pipeline {
 public:
  Pipeline(const GraphStore& store, LlmBackend& backend, PipelineConfig config = {}, PipelineTools tools = {});

  // seed_entities are extra entity mentions injected into the first round.
  // Never throws for run-level failures: they come back in
  // PipelineResult::error with the partial trace and context.
  PipelineResult run(const std::string& question, std::span<const std::string> seed_entities = {});

  const PipelineConfig& config() const { return config_; }

 private:
  const GraphStore& store_;
  LlmBackend& backend_;
  PipelineConfig config_;
  PipelineTools tools_;
  std::optional<EmbeddingIndex> owned_index_;
  Schema schema_;
};

}  // namespace byokg
