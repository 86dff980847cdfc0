#pragma once

#include <json.hpp>

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "byokg/context.hpp"
#include "byokg/graph_store.hpp"
#include "byokg/orchestrator.hpp"

namespace byokg {

struct QaExample {
  std::string id;
  std::string question;
  std::vector<std::string> answers;        // gold answer strings
  std::vector<std::string> seed_entities;  // optional round-one seeds
};

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset lines are JSON objects: {"id", "question", "answers": [..]} plus an
// optional "seed_entities" array. Unknown keys are ignored; malformed lines
// raise DatasetError naming the line number. Blank lines are skipped.
std::vector<QaExample> parse_dataset_jsonl(std::string_view content);
std::vector<QaExample> load_dataset_jsonl(const std::filesystem::path& path);

// Answer matching: whole-string equality after NFC normalization, case
// folding, and trimming (more lenient than raw equality, stricter than
// substring containment).
std::string normalize_answer(std::string_view s);

// 1 iff any prediction matches any gold answer.
int hit(std::span<const std::string> predictions, std::span<const std::string> gold);

// 1 iff the top answer of either source matches gold (at most 2 candidates:
// the first context-grounded answer and the first direct draft answer).
int hit_at_2(std::span<const std::string> kg_answers, std::span<const std::string> direct_answers,
             std::span<const std::string> gold);

// 1 iff a gold answer appears among the entity names / result cells of the
// first k retrieved context items (rank = accumulation order). k must be
// positive.
int recall_at_k(const RetrievalContext& context, const GraphStore& store, std::span<const std::string> gold, int k);

struct ExampleScore {
  std::string id;
  int hit = 0;
  int hit_at_2 = 0;
  int recall_at_k = 0;
  std::size_t llm_calls = 0;
  std::vector<std::string> answers;        // final pipeline answers
  std::vector<std::string> draft_answers;  // round-one direct answers
  bool error = false;
  std::string error_message;

  nlohmann::json to_json() const;
};

struct MetricReport {
  std::size_t examples = 0;
  std::size_t errors = 0;  // failed examples (scored 0, counted here too)
  int recall_k = 10;
  double hit_rate = 0.0;
  double hit_at_2_rate = 0.0;
  double recall_at_k_rate = 0.0;
  std::vector<ExampleScore> per_example;  // dataset order
  nlohmann::json config_echo;

  nlohmann::json to_json() const;
  std::string per_example_jsonl() const;  // one JSON object per example
};

struct EvalOptions {
  int workers = 1;    // examples evaluated concurrently
  int recall_k = 10;  // k for the retrieval recall metric
  PipelineTools tools;
};

// Runs the full pipeline on every example and aggregates the metrics.
// Rates are sums of per-example 0/1 scores divided by the example count.
// Per-example failures score 0 and are tallied in `errors`; they never abort
// the batch.
MetricReport evaluate_batch(const std::vector<QaExample>& dataset, const GraphStore& store, LlmBackend& backend,
                            const PipelineConfig& config, const EvalOptions& options = {});

}  // namespace byokg
