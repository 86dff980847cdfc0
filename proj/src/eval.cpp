#include "byokg/eval.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "byokg/text.hpp"

namespace byokg {

namespace {

std::vector<std::string> string_array(const nlohmann::json& v, const std::string& what, std::size_t line_no) {
  if (!v.is_array())
    throw DatasetError("line " + std::to_string(line_no) + ": \"" + what + "\" must be an array of strings");
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string())
      throw DatasetError("line " + std::to_string(line_no) + ": \"" + what + "\" must contain only strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

std::vector<QaExample> parse_dataset_jsonl(std::string_view content) {
  std::vector<QaExample> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw DatasetError("line " + std::to_string(line_no) + ": expected a JSON object");
    QaExample ex;
    if (!j.contains("id") || !j["id"].is_string())
      throw DatasetError("line " + std::to_string(line_no) + ": missing string field \"id\"");
    if (!j.contains("question") || !j["question"].is_string())
      throw DatasetError("line " + std::to_string(line_no) + ": missing string field \"question\"");
    if (!j.contains("answers"))
      throw DatasetError("line " + std::to_string(line_no) + ": missing field \"answers\"");
    ex.id = j["id"].get<std::string>();
    ex.question = j["question"].get<std::string>();
    ex.answers = string_array(j["answers"], "answers", line_no);
    if (j.contains("seed_entities")) ex.seed_entities = string_array(j["seed_entities"], "seed_entities", line_no);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<QaExample> load_dataset_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset_jsonl(buffer.str());
}

std::string normalize_answer(std::string_view s) { return text::trim(text::casefold(text::nfc(s))); }

int hit(std::span<const std::string> predictions, std::span<const std::string> gold) {
  std::set<std::string> gold_keys;
  for (const auto& g : gold) gold_keys.insert(normalize_answer(g));
  for (const auto& p : predictions)
    if (gold_keys.contains(normalize_answer(p))) return 1;
  return 0;
}

int hit_at_2(std::span<const std::string> kg_answers, std::span<const std::string> direct_answers,
             std::span<const std::string> gold) {
  std::vector<std::string> candidates;
  if (!kg_answers.empty()) candidates.push_back(kg_answers.front());
  if (!direct_answers.empty()) candidates.push_back(direct_answers.front());
  return hit(candidates, gold);
}

int recall_at_k(const RetrievalContext& context, const GraphStore& store, std::span<const std::string> gold, int k) {
  if (k <= 0) throw std::invalid_argument("recall_at_k: k must be positive");
  std::set<std::string> gold_keys;
  for (const auto& g : gold) gold_keys.insert(normalize_answer(g));
  std::vector<RankedItem> items = context.ranked_items(store);
  std::size_t limit = std::min<std::size_t>(items.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < limit; ++i)
    for (const auto& text : items[i].texts)
      if (gold_keys.contains(normalize_answer(text))) return 1;
  return 0;
}

nlohmann::json ExampleScore::to_json() const {
  nlohmann::json j{{"id", id},
                   {"hit", hit},
                   {"hit_at_2", hit_at_2},
                   {"recall_at_k", recall_at_k},
                   {"llm_calls", llm_calls},
                   {"answers", answers},
                   {"draft_answers", draft_answers},
                   {"error", error}};
  if (error) j["error_message"] = error_message;
  return j;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& score : per_example) per.push_back(score.to_json());
  return {{"examples", examples},
          {"errors", errors},
          {"recall_k", recall_k},
          {"hit_rate", hit_rate},
          {"hit_at_2_rate", hit_at_2_rate},
          {"recall_at_k_rate", recall_at_k_rate},
          {"config", config_echo},
          {"per_example", per}};
}

std::string MetricReport::per_example_jsonl() const {
  std::string out;
  for (const auto& score : per_example) {
    out += score.to_json().dump();
    out += '\n';
  }
  return out;
}

MetricReport evaluate_batch(const std::vector<QaExample>& dataset, const GraphStore& store, LlmBackend& backend,
                            const PipelineConfig& config, const EvalOptions& options) {
  if (options.recall_k <= 0) throw std::invalid_argument("evaluate_batch: recall_k must be positive");
  if (options.workers <= 0) throw std::invalid_argument("evaluate_batch: workers must be positive");
  config.validate();

  // Share one embedding index across workers when embedding linking is on.
  PipelineTools tools = options.tools;
  std::optional<EmbeddingIndex> shared_index;
  if (config.link_mode != LinkMode::string_match && tools.link_index == nullptr) {
    Embedder embedder = tools.embedder ? tools.embedder : hashing_embedder();
    shared_index = EmbeddingIndex::build(store, embedder);
    tools.link_index = &*shared_index;
  }

  MetricReport report;
  report.examples = dataset.size();
  report.recall_k = options.recall_k;
  report.config_echo = config.to_json();
  report.per_example.resize(dataset.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    Pipeline pipeline(store, backend, config, tools);
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= dataset.size()) break;
      const QaExample& ex = dataset[i];
      ExampleScore& score = report.per_example[i];
      score.id = ex.id;
      try {
        PipelineResult result = pipeline.run(ex.question, ex.seed_entities);
        score.llm_calls = call_budget_used(result.trace);
        score.answers = result.answers;
        score.draft_answers = result.first_draft_answers;
        if (!result.ok()) {
          score.error = true;
          score.error_message = *result.error;
        } else {
          score.hit = hit(result.answers, ex.answers);
          score.hit_at_2 = hit_at_2(result.answers, result.first_draft_answers, ex.answers);
          score.recall_at_k = recall_at_k(result.context, store, ex.answers, options.recall_k);
        }
      } catch (const std::exception& e) {
        score.error = true;
        score.error_message = e.what();
      }
    }
  };

  std::size_t thread_count = std::min<std::size_t>(static_cast<std::size_t>(options.workers),
                                                   std::max<std::size_t>(dataset.size(), 1));
  std::vector<std::thread> threads;
  threads.reserve(thread_count);
  for (std::size_t i = 0; i < thread_count; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  long hit_sum = 0, hit2_sum = 0, recall_sum = 0;
  for (const auto& score : report.per_example) {
    hit_sum += score.hit;
    hit2_sum += score.hit_at_2;
    recall_sum += score.recall_at_k;
    if (score.error) ++report.errors;
  }
  if (!report.per_example.empty()) {
    double n = static_cast<double>(report.per_example.size());
    report.hit_rate = static_cast<double>(hit_sum) / n;
    report.hit_at_2_rate = static_cast<double>(hit2_sum) / n;
    report.recall_at_k_rate = static_cast<double>(recall_sum) / n;
  }
  return report;
}

}  // namespace byokg
