#include "byokg/orchestrator.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>
#include <utility>

#include "byokg/cypher.hpp"
#include "byokg/paths.hpp"
#include "byokg/text.hpp"

namespace byokg {

namespace {

// Mirrors every exchange into the pipeline trace while delegating to the
// real backend (whose own call log still sees the exchange).
class TracingBackend : public LlmBackend {
 public:
  TracingBackend(LlmBackend& inner, PipelineTrace& trace) : inner_(inner), trace_(trace) {}

 protected:
  std::string do_complete(const LlmRequest& request) override {
    try {
      std::string response = inner_.complete(request);
      trace_.emit({{"event", "llm_call"},
                   {"stage", request.stage},
                   {"prompt_bytes", request.prompt.size()},
                   {"response_bytes", response.size()},
                   {"ok", true}});
      return response;
    } catch (const std::exception& e) {
      trace_.emit({{"event", "llm_call"},
                   {"stage", request.stage},
                   {"prompt_bytes", request.prompt.size()},
                   {"response_bytes", 0},
                   {"ok", false},
                   {"error", std::string(e.what())}});
      throw;
    }
  }

 private:
  LlmBackend& inner_;
  PipelineTrace& trace_;
};

const char* to_string(ScoringMethod m) { return m == ScoringMethod::text ? "text" : "rerank"; }

const char* to_string(LinkMode m) {
  switch (m) {
    case LinkMode::string_match: return "string";
    case LinkMode::embedding: return "embedding";
    case LinkMode::both: return "both";
  }
  return "string";
}

void push_unique(std::vector<std::string>& out, std::set<std::string>& seen, const std::string& value) {
  if (seen.insert(value).second) out.push_back(value);
}

nlohmann::json paths_to_json(const std::vector<RelationPath>& paths) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : paths) arr.push_back(p.relations);
  return arr;
}

std::string render_triplet(const Triplet& t) { return t.head + " -> " + t.relation + " -> " + t.tail; }

std::string render_path(const GroundedPath& p) {
  std::string out = p.nodes.empty() ? std::string{} : p.nodes[0];
  for (std::size_t i = 0; i < p.relations.size(); ++i) {
    out += " -> " + p.relations[i] + " -> " + p.nodes[i + 1];
  }
  return out;
}

std::vector<std::string> parse_answer_lines(const std::string& response) {
  auto block = extract_tag_block(response, "answers");
  if (!block) block = extract_tag_block(response, "answer");
  std::vector<std::string> out;
  if (!block) return out;
  std::set<std::string> seen;
  for (const auto& line : text::split_lines(*block)) {
    std::string t = text::trim(line);
    if (!t.empty()) push_unique(out, seen, t);
  }
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (refinement_iterations < 1) fail("refinement_iterations must be at least 1");
  if (agent_iterations < 1) fail("agent_iterations must be at least 1");
  if (frontier_cap < 1) fail("frontier_cap must be at least 1");
  if (link_top_m < 1) fail("link_top_m must be at least 1");
  if (string_score_floor < 0.0 || string_score_floor > 1.0) fail("string_score_floor must be within [0, 1]");
  if (top_k < 0) fail("top_k must be non-negative (0 selects a default)");
  if (rerank_hops < 1) fail("rerank_hops must be at least 1");
  if (rerank_top_relations < 1) fail("rerank_top_relations must be at least 1");
  if (rerank_prune_to < 1) fail("rerank_prune_to must be at least 1");
  if (max_hops < 1) fail("max_hops must be at least 1");
  if (query_language.empty()) fail("query_language must not be empty");
}

nlohmann::json PipelineConfig::to_json() const {
  return {
      {"refinement_iterations", refinement_iterations},
      {"agent_iterations", agent_iterations},
      {"frontier_cap", frontier_cap},
      {"link_top_m", link_top_m},
      {"link_mode", to_string(link_mode)},
      {"string_score_floor", string_score_floor},
      {"top_k", top_k},
      {"scoring_method", to_string(scoring_method)},
      {"rerank_hops", rerank_hops},
      {"rerank_top_relations", rerank_top_relations},
      {"rerank_prune_to", rerank_prune_to},
      {"max_hops", max_hops},
      {"context_token_budget", context_token_budget},
      {"query_language", query_language},
      {"per_task_calls", per_task_calls},
      {"enable_paths", enable_paths},
      {"enable_query", enable_query},
      {"enable_agentic", enable_agentic},
      {"enable_scoring", enable_scoring},
  };
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  auto as_int = [](const std::string& key, const nlohmann::json& v) -> int {
    if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
    return v.get<int>();
  };
  auto as_size = [](const std::string& key, const nlohmann::json& v) -> std::size_t {
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ConfigError("config key '" + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
  };
  auto as_double = [](const std::string& key, const nlohmann::json& v) -> double {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return v.get<double>();
  };
  auto as_bool = [](const std::string& key, const nlohmann::json& v) -> bool {
    if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
    return v.get<bool>();
  };
  auto as_string = [](const std::string& key, const nlohmann::json& v) -> std::string {
    if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
    return v.get<std::string>();
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "refinement_iterations") c.refinement_iterations = as_int(key, value);
    else if (key == "agent_iterations") c.agent_iterations = as_int(key, value);
    else if (key == "frontier_cap") c.frontier_cap = as_size(key, value);
    else if (key == "link_top_m") c.link_top_m = as_int(key, value);
    else if (key == "link_mode") {
      std::string s = as_string(key, value);
      if (s == "string") c.link_mode = LinkMode::string_match;
      else if (s == "embedding") c.link_mode = LinkMode::embedding;
      else if (s == "both") c.link_mode = LinkMode::both;
      else throw ConfigError("config key 'link_mode' must be one of: string, embedding, both");
    } else if (key == "string_score_floor") c.string_score_floor = as_double(key, value);
    else if (key == "top_k") c.top_k = as_int(key, value);
    else if (key == "scoring_method") {
      std::string s = as_string(key, value);
      if (s == "text") c.scoring_method = ScoringMethod::text;
      else if (s == "rerank") c.scoring_method = ScoringMethod::rerank;
      else throw ConfigError("config key 'scoring_method' must be one of: text, rerank");
    } else if (key == "rerank_hops") c.rerank_hops = as_int(key, value);
    else if (key == "rerank_top_relations") c.rerank_top_relations = as_int(key, value);
    else if (key == "rerank_prune_to") c.rerank_prune_to = as_int(key, value);
    else if (key == "max_hops") c.max_hops = as_int(key, value);
    else if (key == "context_token_budget") c.context_token_budget = as_size(key, value);
    else if (key == "query_language") c.query_language = as_string(key, value);
    else if (key == "per_task_calls") c.per_task_calls = as_bool(key, value);
    else if (key == "enable_paths") c.enable_paths = as_bool(key, value);
    else if (key == "enable_query") c.enable_query = as_bool(key, value);
    else if (key == "enable_agentic") c.enable_agentic = as_bool(key, value);
    else if (key == "enable_scoring") c.enable_scoring = as_bool(key, value);
    else throw ConfigError("unknown config key: " + key);
  }
  c.validate();
  return c;
}

std::string PipelineTrace::to_jsonl() const {
  std::string out;
  for (const auto& event : events) {
    out += event.dump();
    out += '\n';
  }
  return out;
}

std::size_t call_budget_used(const PipelineTrace& trace) {
  return static_cast<std::size_t>(std::count_if(trace.events.begin(), trace.events.end(), [](const nlohmann::json& e) {
    return e.is_object() && e.value("event", "") == "llm_call";
  }));
}

Pipeline::Pipeline(const GraphStore& store, LlmBackend& backend, PipelineConfig config, PipelineTools tools)
    : store_(store), backend_(backend), config_(std::move(config)), tools_(std::move(tools)) {
  config_.validate();
  if (!tools_.embedder) tools_.embedder = hashing_embedder();
  if (!tools_.reranker) tools_.reranker = token_overlap_reranker();
  if (config_.link_mode != LinkMode::string_match && tools_.link_index == nullptr)
    owned_index_ = EmbeddingIndex::build(store_, tools_.embedder);
  schema_ = store_.schema();
}

PipelineResult Pipeline::run(const std::string& question, std::span<const std::string> seed_entities) {
  PipelineResult result;
  PipelineTrace& trace = result.trace;
  RetrievalContext& context = result.context;
  TracingBackend traced(backend_, trace);

  trace.emit({{"event", "run_start"}, {"question", question}, {"config", config_.to_json()}});

  LinkerOptions linker_options;
  linker_options.query_language = config_.query_language;
  linker_options.per_task_calls = config_.per_task_calls;
  linker_options.prompts = tools_.prompts;

  LinkOptions link_options;
  link_options.top_m = config_.link_top_m;
  link_options.mode = config_.link_mode;
  link_options.string_score_floor = config_.string_score_floor;
  link_options.index = tools_.link_index != nullptr ? tools_.link_index : (owned_index_ ? &*owned_index_ : nullptr);
  link_options.embedder = tools_.embedder;

  std::set<std::string> ids_seen_across_rounds;
  std::vector<std::string> last_draft_answers;

  try {
    for (int t = 1; t <= config_.refinement_iterations; ++t) {
      std::optional<std::string> context_text;
      if (!context.empty()) context_text = context.verbalize(store_, config_.context_token_budget);

      GraphArtifacts artifacts = generate_artifacts(question, schema_, context_text, traced, linker_options);
      trace.emit({{"event", "artifacts"},
                  {"iteration", t},
                  {"entities", artifacts.entities},
                  {"paths", paths_to_json(artifacts.paths)},
                  {"query", artifacts.query ? nlohmann::json(*artifacts.query) : nlohmann::json(nullptr)},
                  {"draft_answers", artifacts.draft_answers},
                  {"finished", artifacts.finished}});

      if (t == 1) result.first_draft_answers = artifacts.draft_answers;
      if (!artifacts.draft_answers.empty()) last_draft_answers = artifacts.draft_answers;

      if (artifacts.finished) {
        trace.emit({{"event", "finish_signal"}, {"iteration", t}});
        break;
      }

      // Link round artifacts to graph ids. Seeds join the first round only;
      // a seed that is already an entity id links directly.
      std::vector<Mention> mentions;
      std::vector<std::string> extracted_ids, draft_ids;
      std::set<std::string> extracted_seen, draft_seen;
      if (t == 1) {
        for (const auto& seed : seed_entities) {
          if (store_.find(seed) != nullptr) push_unique(extracted_ids, extracted_seen, seed);
          else mentions.push_back({seed, MentionSource::extracted});
        }
      }
      for (const auto& e : artifacts.entities) mentions.push_back({e, MentionSource::extracted});
      for (const auto& a : artifacts.draft_answers) mentions.push_back({a, MentionSource::draft_answer});

      std::vector<LinkedEntity> linked = link_mentions(mentions, store_, link_options);
      nlohmann::json link_records = nlohmann::json::array();
      for (const auto& record : linked) {
        auto& ids = record.mention.source == MentionSource::extracted ? extracted_ids : draft_ids;
        auto& seen = record.mention.source == MentionSource::extracted ? extracted_seen : draft_seen;
        push_unique(ids, seen, record.entity_id);
        link_records.push_back({{"id", record.entity_id},
                                {"mention", record.mention.text},
                                {"method", record.method == LinkMethod::string_match ? "string" : "embedding"},
                                {"score", record.score},
                                {"rank", record.rank}});
      }
      std::vector<std::string> all_ids = extracted_ids;
      {
        std::set<std::string> seen(extracted_ids.begin(), extracted_ids.end());
        for (const auto& id : draft_ids) push_unique(all_ids, seen, id);
      }
      trace.emit({{"event", "linking"}, {"iteration", t}, {"linked_ids", all_ids}, {"records", link_records}});

      bool any_new_id = std::any_of(all_ids.begin(), all_ids.end(),
                                    [&](const std::string& id) { return !ids_seen_across_rounds.contains(id); });
      if (t >= 2 && !any_new_id) {
        trace.emit({{"event", "converged"}, {"iteration", t}});
        break;
      }
      ids_seen_across_rounds.insert(all_ids.begin(), all_ids.end());

      if (all_ids.empty() && !artifacts.query) {
        trace.emit({{"event", "no_groundable_artifacts"}, {"iteration", t}});
        break;
      }

      if (config_.enable_paths) {
        try {
          std::size_t follow_found = 0, shortest_found = 0;
          std::vector<std::string> follow_added, shortest_added, follow_warnings;
          if (!artifacts.paths.empty() && !all_ids.empty()) {
            FollowResult followed = follow_paths(artifacts.paths, all_ids, store_);
            follow_found = followed.paths.size();
            follow_warnings = followed.warnings;
            for (const auto& p : followed.paths)
              if (context.add_path(p, Provenance::follow)) follow_added.push_back(render_path(p));
          }
          if (!extracted_ids.empty() && !draft_ids.empty()) {
            std::vector<GroundedPath> connecting =
                shortest_paths(extracted_ids, draft_ids, store_, config_.max_hops);
            shortest_found = connecting.size();
            for (const auto& p : connecting)
              if (context.add_path(p, Provenance::shortest)) shortest_added.push_back(render_path(p));
          }
          trace.emit({{"event", "path_retrieval"},
                      {"iteration", t},
                      {"followed", follow_found},
                      {"follow_added", follow_added},
                      {"follow_warnings", follow_warnings},
                      {"shortest", shortest_found},
                      {"shortest_added", shortest_added}});
        } catch (const std::exception& e) {
          trace.emit(
              {{"event", "strategy_error"}, {"iteration", t}, {"strategy", "paths"}, {"message", std::string(e.what())}});
        }
      }

      if (config_.enable_query && artifacts.query) {
        try {
          cypher::QueryOutcome outcome = cypher::run_query_text(store_, *artifacts.query);
          context.add_query_record(*artifacts.query, outcome);
          nlohmann::json event{{"event", "query_execution"}, {"iteration", t}, {"ok", outcome.ok()}};
          if (outcome.ok()) {
            event["rows"] = outcome.table->rows.size();
          } else {
            event["error_kind"] = std::string(cypher::to_string(outcome.error->kind));
            event["error_message"] = outcome.error->message;
          }
          trace.emit(std::move(event));
        } catch (const std::exception& e) {
          trace.emit(
              {{"event", "strategy_error"}, {"iteration", t}, {"strategy", "query"}, {"message", std::string(e.what())}});
        }
      }

      if (config_.enable_agentic && !all_ids.empty()) {
        try {
          AgentOptions agent_options;
          agent_options.max_iterations = config_.agent_iterations;
          agent_options.frontier_cap = config_.frontier_cap;
          agent_options.frontier_linking.top_m = 1;
          agent_options.frontier_linking.string_score_floor = config_.string_score_floor;
          agent_options.prompts = tools_.prompts;
          std::vector<Triplet> prior = context.triplet_values();
          AgentResult agent = agentic_retrieve(question, all_ids, store_, traced, agent_options, prior);
          std::vector<std::string> added;
          for (const auto& triplet : agent.triplets)
            if (context.add_triplet(triplet, Provenance::agentic)) added.push_back(render_triplet(triplet));
          trace.emit({{"event", "agentic_retrieval"},
                      {"iteration", t},
                      {"triplets", agent.triplets.size()},
                      {"added", added},
                      {"agent_iterations", agent.iterations.size()},
                      {"llm_calls", agent.llm_calls},
                      {"warnings", agent.warnings}});
        } catch (const std::exception& e) {
          trace.emit({{"event", "strategy_error"},
                      {"iteration", t},
                      {"strategy", "agentic"},
                      {"message", std::string(e.what())}});
        }
      }

      if (config_.enable_scoring) {
        try {
          int k = config_.top_k > 0 ? config_.top_k : default_top_k(store_);
          std::vector<ScoredTriplet> scored;
          if (config_.scoring_method == ScoringMethod::text) {
            scored = text_retrieve(question, k, store_, tools_.embedder);
          } else {
            RerankOptions rerank_options{config_.rerank_hops, config_.rerank_top_relations, config_.rerank_prune_to, k};
            scored = rerank_retrieve(question, all_ids, store_, tools_.reranker, rerank_options).final;
          }
          std::vector<std::string> added;
          for (const auto& s : scored)
            if (context.add_triplet(s.triplet, Provenance::scoring)) added.push_back(render_triplet(s.triplet));
          trace.emit({{"event", "scoring_retrieval"},
                      {"iteration", t},
                      {"method", to_string(config_.scoring_method)},
                      {"scored", scored.size()},
                      {"added", added}});
        } catch (const std::exception& e) {
          trace.emit({{"event", "strategy_error"},
                      {"iteration", t},
                      {"strategy", "scoring"},
                      {"message", std::string(e.what())}});
        }
      }

      trace.emit({{"event", "iteration_end"}, {"iteration", t}, {"context_items", context.item_count()}});
    }

    const PromptLibrary& prompts = tools_.prompts != nullptr ? *tools_.prompts : PromptLibrary::builtin();
    std::string evidence = context.empty() ? "(no graph context)" : context.verbalize(store_, config_.context_token_budget);
    LlmRequest request{fill_template(prompts.get("final_answer"),
                                     {{"question", question}, {"graph_context", evidence}}),
                       "final_answer"};
    std::string response;
    try {
      response = traced.complete(request);
    } catch (const TransportError&) {
      response = traced.complete(request);
    }
    result.answers = parse_answer_lines(response);
    bool fell_back = false;
    if (result.answers.empty() && !last_draft_answers.empty()) {
      result.answers = last_draft_answers;
      fell_back = true;
    }
    trace.emit({{"event", "final_answer"}, {"answers", result.answers}, {"draft_fallback", fell_back}});
  } catch (const std::exception& e) {
    result.error = e.what();
    trace.emit({{"event", "run_error"}, {"message", std::string(e.what())}});
    // Best effort: surface whatever draft answers the rounds produced.
    if (result.answers.empty() && !last_draft_answers.empty()) result.answers = last_draft_answers;
  }

  trace.emit({{"event", "run_end"},
              {"ok", result.ok()},
              {"answers", result.answers},
              {"llm_calls", call_budget_used(trace)},
              {"context_items", context.item_count()}});
  return result;
}

}  // namespace byokg
