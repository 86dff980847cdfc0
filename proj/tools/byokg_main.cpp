// Command-line front end: thin adapters over the library operations.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "byokg/cypher.hpp"
#include "byokg/eval.hpp"
#include "byokg/graph_store.hpp"
#include "byokg/http_adapters.hpp"
#include "byokg/kg_linker.hpp"
#include "byokg/linking.hpp"
#include "byokg/llm_client.hpp"
#include "byokg/orchestrator.hpp"
#include "byokg/paths.hpp"
#include "byokg/retrieval.hpp"
#include "byokg/text.hpp"

namespace {

using byokg::GraphStore;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

bool has_suffix(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct GraphArgs {
  std::string graph;
  std::string metadata;
  std::string cache_dir;
};

void add_graph_options(CLI::App* cmd, GraphArgs& args) {
  cmd->add_option("--graph", args.graph, "graph file (.json, else tab-separated triples)")->required();
  cmd->add_option("--metadata", args.metadata, "entity metadata file (id, name, type per line)");
  cmd->add_option("--cache-dir", args.cache_dir, "snapshot cache directory (keyed by input content hash)");
}

GraphStore ingest_source(const GraphArgs& args, const std::string& content) {
  if (has_suffix(args.graph, ".json")) {
    if (!args.metadata.empty()) throw UsageError("--metadata only applies to tab-separated graphs");
    return byokg::parse_graph_json(content);
  }
  GraphStore store;
  if (!args.metadata.empty()) byokg::apply_entity_metadata_tsv(store, read_file(args.metadata));
  std::vector<byokg::TripleRow> rows = byokg::parse_triples_tsv(content);
  if (rows.empty()) throw byokg::IngestError("empty input: " + args.graph + " contains no triple rows");
  return byokg::ingest_triples(rows);
}

std::string store_content_hash(const GraphArgs& args, const std::string& content) {
  std::string keyed = content;
  if (!args.metadata.empty()) keyed += "\n--metadata--\n" + read_file(args.metadata);
  return fnv1a_hex(keyed);
}

// Loads via the snapshot cache when a cache dir is set; otherwise ingests.
GraphStore load_store(const GraphArgs& args) {
  std::string content = read_file(args.graph);
  if (args.cache_dir.empty()) return ingest_source(args, content);
  std::filesystem::path snapshot =
      std::filesystem::path(args.cache_dir) / (store_content_hash(args, content) + ".json");
  if (std::filesystem::exists(snapshot)) return byokg::load_graph_json(snapshot);
  GraphStore store = ingest_source(args, content);
  std::filesystem::create_directories(args.cache_dir);
  byokg::save_graph_json(store, snapshot);
  return store;
}

struct BackendArgs {
  std::string script;
  std::string endpoint;
  std::string model = "default";
};

void add_backend_options(CLI::App* cmd, BackendArgs& args) {
  cmd->add_option("--script", args.script, "scripted completion file (deterministic backend)");
  cmd->add_option("--endpoint", args.endpoint, "chat-completions base URL (auth token from BYOKG_API_KEY)");
  cmd->add_option("--model", args.model, "model name for --endpoint requests");
}

std::unique_ptr<byokg::LlmBackend> make_backend(const BackendArgs& args) {
  if (!args.script.empty() && !args.endpoint.empty()) {
    throw UsageError("pass either --script or --endpoint, not both");
  }
  if (!args.script.empty()) return byokg::ScriptedBackend::from_file(args.script);
  if (!args.endpoint.empty()) {
    byokg::ChatCompletionOptions options;
    options.base_url = args.endpoint;
    options.model = args.model;
    return std::make_unique<byokg::HttpLlmBackend>(options);
  }
  throw UsageError("an LLM backend is required: pass --script FILE or --endpoint URL");
}

std::optional<int> env_int(const char* name) {
  const char* raw = std::getenv(name);
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  try {
    return std::stoi(raw);
  } catch (const std::exception&) {
    throw UsageError(std::string(name) + " must be an integer, got \"" + raw + "\"");
  }
}

struct ConfigArgs {
  std::string config_path;
  int top_k = 0;
  bool top_k_set = false;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_path, "pipeline configuration JSON file");
  cmd->add_option("--top-k", args.top_k, "retrieved triplets kept by scoring (overrides config and BYOKG_TOP_K)")
      ->each([&args](const std::string&) { args.top_k_set = true; });
}

// Precedence, lowest to highest: config file, environment, flags.
byokg::PipelineConfig resolve_config(const ConfigArgs& args) {
  byokg::PipelineConfig config;
  if (!args.config_path.empty()) {
    json doc = json::parse(read_file(args.config_path), nullptr, false);
    if (doc.is_discarded()) throw UsageError("config file is not valid JSON: " + args.config_path);
    config = byokg::PipelineConfig::from_json(doc);
  }
  if (auto k = env_int("BYOKG_TOP_K")) config.top_k = *k;
  if (args.top_k_set) config.top_k = args.top_k;
  config.validate();
  return config;
}

int resolve_workers(int flag_value, bool flag_set) {
  if (flag_set) return flag_value;
  if (auto w = env_int("BYOKG_WORKERS")) return *w;
  return 1;
}

std::string render_triplet(const byokg::Triplet& t) { return t.head + " -> " + t.relation + " -> " + t.tail; }

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write file: " + path.string());
  out << content;
}

// --- subcommand bodies ---------------------------------------------------

int run_ingest(const GraphArgs& graph_args, bool as_json) {
  std::string content = read_file(graph_args.graph);
  GraphStore store = ingest_source(graph_args, content);
  std::string cache_dir = graph_args.cache_dir.empty() ? ".byokg-cache" : graph_args.cache_dir;
  std::string hash = store_content_hash(graph_args, content);
  std::filesystem::path snapshot = std::filesystem::path(cache_dir) / (hash + ".json");
  std::filesystem::create_directories(cache_dir);
  byokg::save_graph_json(store, snapshot);
  if (as_json) {
    std::cout << json{{"entities", store.entity_count()},
                      {"triplets", store.triplet_count()},
                      {"content_hash", hash},
                      {"snapshot", snapshot.string()}}
                     .dump()
              << "\n";
  } else {
    std::cout << "entities: " << store.entity_count() << "\n"
              << "triplets: " << store.triplet_count() << "\n"
              << "snapshot: " << snapshot.string() << "\n";
  }
  return 0;
}

int run_schema(const GraphArgs& graph_args, bool as_json) {
  byokg::Schema schema = load_store(graph_args).schema();
  if (as_json) {
    json signatures = json::array();
    for (const auto& sig : schema.relation_signatures) signatures.push_back({sig[0], sig[1], sig[2]});
    std::cout << json{{"node_types", schema.node_types},
                      {"relation_types", schema.relation_types},
                      {"relation_signatures", signatures},
                      {"property_keys", schema.property_keys}}
                     .dump()
              << "\n";
  } else {
    std::cout << schema.to_text() << "\n";
  }
  return 0;
}

int run_link(const GraphArgs& graph_args, const std::vector<std::string>& mentions, int top_m, double floor,
             const std::string& mode, bool as_json) {
  GraphStore store = load_store(graph_args);
  byokg::LinkOptions options;
  options.top_m = top_m;
  options.string_score_floor = floor;
  if (mode == "string") {
    options.mode = byokg::LinkMode::string_match;
  } else if (mode == "embedding") {
    options.mode = byokg::LinkMode::embedding;
  } else if (mode == "both") {
    options.mode = byokg::LinkMode::both;
  } else {
    throw UsageError("--mode must be one of: string, embedding, both");
  }
  byokg::EmbeddingIndex index;
  if (options.mode != byokg::LinkMode::string_match) {
    options.embedder = byokg::hashing_embedder();
    index = byokg::EmbeddingIndex::build(store, options.embedder);
    options.index = &index;
  }
  std::vector<byokg::Mention> mention_records;
  for (const std::string& m : mentions) mention_records.push_back({m, byokg::MentionSource::extracted});
  std::vector<byokg::LinkedEntity> linked = byokg::link_mentions(mention_records, store, options);
  json records = json::array();
  for (const auto& le : linked) {
    const char* method = le.method == byokg::LinkMethod::string_match ? "string" : "embedding";
    if (as_json) {
      records.push_back({{"mention", le.mention.text},
                         {"rank", le.rank},
                         {"entity_id", le.entity_id},
                         {"score", le.score},
                         {"method", method}});
    } else {
      std::cout << le.mention.text << "\t" << le.rank << "\t" << le.entity_id << "\t" << le.score << "\t" << method
                << "\n";
    }
  }
  if (as_json) std::cout << records.dump() << "\n";
  return 0;
}

int run_paths(const GraphArgs& graph_args, const std::vector<std::string>& relpaths,
              const std::vector<std::string>& sources, bool as_json) {
  GraphStore store = load_store(graph_args);
  std::vector<byokg::RelationPath> chains;
  for (const std::string& raw : relpaths) {
    byokg::RelationPath chain;
    std::size_t start = 0;
    while (start <= raw.size()) {
      std::size_t arrow = raw.find("->", start);
      std::string part =
          byokg::text::trim(arrow == std::string::npos ? raw.substr(start) : raw.substr(start, arrow - start));
      if (!part.empty()) chain.relations.push_back(std::move(part));
      if (arrow == std::string::npos) break;
      start = arrow + 2;
    }
    if (chain.relations.empty()) throw UsageError("--relpath has no relation labels: \"" + raw + "\"");
    chains.push_back(std::move(chain));
  }
  byokg::FollowResult result = byokg::follow_paths(chains, sources, store);
  if (as_json) {
    json paths = json::array();
    for (const auto& p : result.paths) {
      paths.push_back({{"nodes", p.nodes},
                       {"relations", p.relations},
                       {"rendered", byokg::verbalize_paths(store, {&p, 1})}});
    }
    std::cout << json{{"paths", paths}, {"warnings", result.warnings}}.dump() << "\n";
  } else {
    if (!result.paths.empty()) std::cout << byokg::verbalize_paths(store, result.paths) << "\n";
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  }
  return 0;
}

int run_query(const GraphArgs& graph_args, const std::string& query_text, bool as_json) {
  GraphStore store = load_store(graph_args);
  byokg::cypher::QueryOutcome outcome = byokg::cypher::run_query_text(store, query_text);
  if (!outcome.ok()) {
    if (as_json) {
      std::cout << json{{"error",
                         {{"kind", std::string(byokg::cypher::to_string(outcome.error->kind))},
                          {"message", outcome.error->message},
                          {"position", outcome.error->position}}}}
                       .dump()
                << "\n";
    } else {
      std::cerr << "query error: " << outcome.error->message << "\n";
    }
    return 2;
  }
  if (as_json) {
    json rows = json::array();
    for (const auto& row : outcome.table->rows) {
      json cells = json::array();
      for (const auto& cell : row) cells.push_back(cell.to_string());
      rows.push_back(std::move(cells));
    }
    std::cout << json{{"columns", outcome.table->columns}, {"rows", rows}}.dump() << "\n";
  } else {
    std::cout << outcome.table->to_tsv();
  }
  return 0;
}

int run_retrieve(const GraphArgs& graph_args, const std::string& question, const std::string& strategy,
                 const std::vector<std::string>& seeds, const ConfigArgs& config_args, const BackendArgs& backend_args,
                 bool as_json) {
  GraphStore store = load_store(graph_args);
  byokg::PipelineConfig config = resolve_config(config_args);
  int k = config.top_k > 0 ? config.top_k : byokg::default_top_k(store);
  json out;
  std::vector<byokg::Triplet> triplets;
  if (strategy == "agentic") {
    std::unique_ptr<byokg::LlmBackend> backend = make_backend(backend_args);
    byokg::AgentOptions options;
    options.max_iterations = config.agent_iterations;
    options.frontier_cap = config.frontier_cap;
    byokg::AgentResult result = byokg::agentic_retrieve(question, seeds, store, *backend, options);
    triplets = result.triplets;
    out["llm_calls"] = result.llm_calls;
    out["iterations"] = result.iterations.size();
    out["warnings"] = result.warnings;
  } else if (strategy == "text") {
    for (const auto& s : byokg::text_retrieve(question, k, store, byokg::hashing_embedder())) {
      triplets.push_back(s.triplet);
    }
  } else if (strategy == "rerank") {
    byokg::RerankOptions options{config.rerank_hops, config.rerank_top_relations, config.rerank_prune_to, k};
    for (const auto& s :
         byokg::rerank_retrieve(question, seeds, store, byokg::token_overlap_reranker(), options).final) {
      triplets.push_back(s.triplet);
    }
  } else {
    throw UsageError("--strategy must be one of: agentic, text, rerank");
  }
  if (as_json) {
    json rendered = json::array();
    for (const auto& t : triplets) rendered.push_back(render_triplet(t));
    out["strategy"] = strategy;
    out["triplets"] = rendered;
    std::cout << out.dump() << "\n";
  } else if (!triplets.empty()) {
    std::cout << byokg::verbalize_triplets(store, triplets) << "\n";
  }
  return 0;
}

int run_answer(const GraphArgs& graph_args, const std::string& question, const std::vector<std::string>& seeds,
               const ConfigArgs& config_args, const BackendArgs& backend_args, const std::string& trace_out,
               bool as_json) {
  GraphStore store = load_store(graph_args);
  byokg::PipelineConfig config = resolve_config(config_args);
  std::unique_ptr<byokg::LlmBackend> backend = make_backend(backend_args);
  byokg::Pipeline pipeline(store, *backend, config);
  byokg::PipelineResult result = pipeline.run(question, seeds);
  write_text_file(trace_out, result.trace.to_jsonl());
  if (as_json) {
    json out{{"answers", result.answers},
             {"first_draft_answers", result.first_draft_answers},
             {"ok", result.ok()},
             {"llm_calls", byokg::call_budget_used(result.trace)},
             {"trace", trace_out}};
    if (result.error) out["error"] = *result.error;
    std::cout << out.dump() << "\n";
  } else {
    for (const auto& a : result.answers) std::cout << a << "\n";
    std::cout << "trace: " << trace_out << "\n";
    if (result.error) std::cerr << "error: " << *result.error << "\n";
  }
  return result.ok() ? 0 : 2;
}

int run_eval(const GraphArgs& graph_args, const std::string& dataset_path, const ConfigArgs& config_args,
             const BackendArgs& backend_args, int workers_flag, bool workers_set, int recall_k,
             const std::string& report_out, const std::string& per_example_out, bool as_json) {
  GraphStore store = load_store(graph_args);
  byokg::PipelineConfig config = resolve_config(config_args);
  std::unique_ptr<byokg::LlmBackend> backend = make_backend(backend_args);
  std::vector<byokg::QaExample> dataset = byokg::load_dataset_jsonl(dataset_path);
  byokg::EvalOptions options;
  options.workers = resolve_workers(workers_flag, workers_set);
  options.recall_k = recall_k;
  byokg::MetricReport report = byokg::evaluate_batch(dataset, store, *backend, config, options);
  write_text_file(report_out, report.to_json().dump(2) + "\n");
  if (!per_example_out.empty()) write_text_file(per_example_out, report.per_example_jsonl());
  if (as_json) {
    std::cout << report.to_json().dump() << "\n";
  } else {
    std::cout << "examples: " << report.examples << "\n"
              << "errors: " << report.errors << "\n"
              << "hit_rate: " << report.hit_rate << "\n"
              << "hit_at_2_rate: " << report.hit_at_2_rate << "\n"
              << "recall_at_" << report.recall_k << "_rate: " << report.recall_at_k_rate << "\n"
              << "report: " << report_out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge-graph question answering: ingest a graph, link mentions, retrieve context, answer"};
  app.require_subcommand(1);
  app.footer("Setting precedence, lowest to highest: --config file, environment (BYOKG_TOP_K, BYOKG_WORKERS),\n"
             "flags. HTTP backends read their auth token from BYOKG_API_KEY.");
  bool as_json = false;
  app.add_flag("--json", as_json, "emit machine-readable JSON on stdout");

  GraphArgs graph_args;

  auto* ingest_cmd = app.add_subcommand("ingest", "build a store from a graph file and cache a snapshot");
  add_graph_options(ingest_cmd, graph_args);

  auto* schema_cmd = app.add_subcommand("schema", "print the graph schema");
  add_graph_options(schema_cmd, graph_args);

  auto* link_cmd = app.add_subcommand("link", "link entity mentions to graph entities (TSV output)");
  add_graph_options(link_cmd, graph_args);
  std::vector<std::string> mentions;
  int top_m = 3;
  double floor = 0.4;
  std::string link_mode = "string";
  link_cmd->add_option("--mention", mentions, "mention text (repeatable)")->required();
  link_cmd->add_option("--top-m", top_m, "candidates kept per mention");
  link_cmd->add_option("--floor", floor, "minimum string similarity");
  link_cmd->add_option("--mode", link_mode, "string, embedding, or both");

  auto* paths_cmd = app.add_subcommand("paths", "ground relation chains from source entities");
  add_graph_options(paths_cmd, graph_args);
  std::vector<std::string> relpaths, path_sources;
  paths_cmd->add_option("--relpath", relpaths, "relation chain, labels joined by '->' (repeatable)")->required();
  paths_cmd->add_option("--source", path_sources, "source entity id (repeatable)")->required();

  auto* query_cmd = app.add_subcommand("query", "execute a graph query");
  add_graph_options(query_cmd, graph_args);
  std::string query_text;
  query_cmd->add_option("query", query_text, "query text")->required();

  auto* retrieve_cmd = app.add_subcommand("retrieve", "retrieve question-relevant triplets");
  add_graph_options(retrieve_cmd, graph_args);
  ConfigArgs config_args;
  BackendArgs backend_args;
  std::string question, strategy;
  std::vector<std::string> seeds;
  retrieve_cmd->add_option("--question", question, "natural-language question")->required();
  retrieve_cmd->add_option("--strategy", strategy, "agentic, text, or rerank")->required();
  retrieve_cmd->add_option("--seed", seeds, "seed entity id (repeatable)");
  add_config_options(retrieve_cmd, config_args);
  add_backend_options(retrieve_cmd, backend_args);

  auto* answer_cmd = app.add_subcommand("answer", "run the full question-answering pipeline");
  add_graph_options(answer_cmd, graph_args);
  std::string answer_question, trace_out = "byokg_trace.jsonl";
  std::vector<std::string> answer_seeds;
  answer_cmd->add_option("--question", answer_question, "natural-language question")->required();
  answer_cmd->add_option("--seed", answer_seeds, "seed entity mention (repeatable)");
  answer_cmd->add_option("--trace-out", trace_out, "where to write the run trace (JSON lines)");
  add_config_options(answer_cmd, config_args);
  add_backend_options(answer_cmd, backend_args);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a question dataset and write a metric report");
  add_graph_options(eval_cmd, graph_args);
  std::string dataset_path, report_out = "byokg_report.json", per_example_out;
  int workers = 1, recall_k = 10;
  bool workers_set = false;
  eval_cmd->add_option("--dataset", dataset_path, "dataset JSONL file")->required();
  eval_cmd->add_option("--workers", workers, "examples evaluated concurrently (overrides BYOKG_WORKERS)")
      ->each([&workers_set](const std::string&) { workers_set = true; });
  eval_cmd->add_option("--recall-k", recall_k, "k for the retrieval recall metric");
  eval_cmd->add_option("--report", report_out, "metric report output path");
  eval_cmd->add_option("--per-example", per_example_out, "per-example scores output path (JSON lines)");
  add_config_options(eval_cmd, config_args);
  add_backend_options(eval_cmd, backend_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << "\n";
    return 1;
  }

  try {
    if (*ingest_cmd) return run_ingest(graph_args, as_json);
    if (*schema_cmd) return run_schema(graph_args, as_json);
    if (*link_cmd) return run_link(graph_args, mentions, top_m, floor, link_mode, as_json);
    if (*paths_cmd) return run_paths(graph_args, relpaths, path_sources, as_json);
    if (*query_cmd) return run_query(graph_args, query_text, as_json);
    if (*retrieve_cmd)
      return run_retrieve(graph_args, question, strategy, seeds, config_args, backend_args, as_json);
    if (*answer_cmd)
      return run_answer(graph_args, answer_question, answer_seeds, config_args, backend_args, trace_out, as_json);
    if (*eval_cmd)
      return run_eval(graph_args, dataset_path, config_args, backend_args, workers, workers_set, recall_k, report_out,
                      per_example_out, as_json);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const byokg::IngestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const byokg::DatasetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const byokg::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const byokg::ScriptValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
