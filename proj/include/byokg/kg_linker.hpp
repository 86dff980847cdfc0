#pragma once

#include <optional>
#include <string>
#include <vector>

#include "byokg/graph_store.hpp"
#include "byokg/llm_client.hpp"
#include "byokg/paths.hpp"
#include "byokg/prompts.hpp"

namespace byokg {

// The graph artifacts one generation round produces: entity mentions,
// candidate relation chains, an optional graph query, and draft answers.
struct GraphArtifacts {
  std::vector<std::string> entities;  // deduplicated, order-preserving
  std::vector<RelationPath> paths;
  std::optional<std::string> query;
  std::vector<std::string> draft_answers;  // deduplicated, order-preserving
  // True when the entity block consisted solely of the FINISH sentinel.
  bool finished = false;

  bool operator==(const GraphArtifacts&) const = default;
};

struct LinkerOptions {
  std::string query_language = "openCypher";
  // One combined prompt covering all four tasks (default), or one prompt per
  // task when set.
  bool per_task_calls = false;
  const PromptLibrary* prompts = nullptr;  // null = builtin
};

// Fully assembled artifact-generation prompt plus its constituent parts.
struct PromptBundle {
  std::string task_text;     // instruction sections
  std::string question;
  std::string schema_text;
  std::string context_text;  // empty when no context was supplied
  std::string text;          // the complete prompt sent to the model
};

// Builds the artifact-generation prompt. With context present, the entity
// task switches from fresh extraction to picking the next entities to
// explore. All four task sections appear exactly once.
PromptBundle build_prompt(const std::string& question, const Schema& schema,
                          const std::optional<std::string>& context_text, const LinkerOptions& options = {});

// Pulls artifacts out of a model response. Unknown surrounding prose is
// ignored; only the first occurrence of each tag block counts; an unclosed
// tag runs to the end of the text. Never throws: unparseable sections come
// back empty. A FINISH line among other entities is dropped (the flag is set
// only when FINISH is the whole block).
GraphArtifacts parse_response(std::string_view response);

// First <tag>...</tag> block of a response, case-insensitive on the tag
// name; an unclosed tag runs to the end of the input.
std::optional<std::string> extract_tag_block(std::string_view response, std::string_view tag);

// Renders artifacts in the exact tagged shape parse_response consumes
// (used for fixtures and round-trip checks).
std::string render_response(const GraphArtifacts& artifacts);

// One artifact-generation round against the backend; transport failures are
// retried once before propagating.
GraphArtifacts generate_artifacts(const std::string& question, const Schema& schema,
                                  const std::optional<std::string>& context_text, LlmBackend& backend,
                                  const LinkerOptions& options = {});

}  // namespace byokg
