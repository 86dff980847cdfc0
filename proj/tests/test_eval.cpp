#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "byokg/context.hpp"
#include "byokg/eval.hpp"
#include "byokg/graph_store.hpp"
#include "byokg/llm_client.hpp"

using namespace byokg;
using nlohmann::json;

namespace {

const std::filesystem::path kFixtures = BYOKG_FIXTURES_DIR;

GraphStore dodgers() { return load_triples_tsv(kFixtures / "dodgers.tsv"); }

std::vector<std::string> strs(std::initializer_list<const char*> items) {
  return std::vector<std::string>(items.begin(), items.end());
}

}  // namespace

// --- dataset parsing --------------------------------------------------------

TEST_CASE("dataset lines parse into examples; blanks and unknown keys are tolerated") {
  std::string content =
      R"({"id": "e1", "question": "who?", "answers": ["Ann", "Bob"]})"
      "\n\n"
      R"({"id": "e2", "question": "where?", "answers": [], "seed_entities": ["Ann"], "split": "dev"})"
      "\n";
  std::vector<QaExample> ds = parse_dataset_jsonl(content);
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].id == "e1");
  CHECK(ds[0].question == "who?");
  CHECK(ds[0].answers == strs({"Ann", "Bob"}));
  CHECK(ds[0].seed_entities.empty());
  CHECK(ds[1].id == "e2");
  CHECK(ds[1].answers.empty());
  CHECK(ds[1].seed_entities == strs({"Ann"}));

  CHECK(parse_dataset_jsonl("").empty());
  CHECK(parse_dataset_jsonl("\n  \n\n").empty());
}

TEST_CASE("dataset errors name the offending line") {
  auto expect_error = [](const std::string& content, const char* needle) {
    CHECK_THROWS_WITH_AS(parse_dataset_jsonl(content), doctest::Contains(needle), DatasetError);
  };
  std::string good = R"({"id": "e1", "question": "q", "answers": []})";
  expect_error(good + "\nnot json", "line 2: invalid JSON");
  expect_error("[1, 2]", "line 1: expected a JSON object");
  expect_error(R"({"question": "q", "answers": []})", "missing string field \"id\"");
  expect_error(R"({"id": 7, "question": "q", "answers": []})", "missing string field \"id\"");
  expect_error(R"({"id": "e", "answers": []})", "missing string field \"question\"");
  expect_error(R"({"id": "e", "question": "q"})", "missing field \"answers\"");
  expect_error(R"({"id": "e", "question": "q", "answers": "Ann"})", "\"answers\" must be an array");
  expect_error(R"({"id": "e", "question": "q", "answers": ["Ann", 3]})", "must contain only strings");
  expect_error(good + "\n" + good + "\n" + R"({"id": "e", "question": "q", "answers": [], "seed_entities": 9})",
               "line 3: \"seed_entities\" must be an array");
}

TEST_CASE("datasets load from disk and missing files are reported") {
  std::filesystem::path dir = std::filesystem::temp_directory_path() /
                              ("eval_ds_" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  std::filesystem::path file = dir / "tiny.jsonl";
  {
    std::ofstream out(file, std::ios::binary);
    out << R"({"id": "x", "question": "q", "answers": ["a"]})" << "\n";
  }
  std::vector<QaExample> ds = load_dataset_jsonl(file);
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].id == "x");
  CHECK_THROWS_WITH_AS(load_dataset_jsonl(dir / "absent.jsonl"), doctest::Contains("cannot open dataset file"),
                       DatasetError);
  std::filesystem::remove_all(dir);
}

// --- answer matching ---------------------------------------------------------

TEST_CASE("answer normalization folds case, trims, and canonicalizes unicode") {
  CHECK(normalize_answer("  Los Angeles Dodgers  ") == "los angeles dodgers");
  CHECK(normalize_answer("CAFE\xCC\x81") == normalize_answer("caf\xC3\xA9"));  // NFD vs NFC
  CHECK(normalize_answer("") == "");
  CHECK(normalize_answer("\t\n ") == "");
}

TEST_CASE("hit requires a whole-string match, not containment") {
  std::vector<std::string> gold{"Los Angeles Dodgers"};
  CHECK(hit(strs({"Los Angeles Dodgers"}), gold) == 1);
  CHECK(hit(strs({" los angeles DODGERS "}), gold) == 1);
  CHECK(hit(strs({"Los Angeles"}), gold) == 0);               // substring is not enough
  CHECK(hit(strs({"The Los Angeles Dodgers won"}), gold) == 0);  // superstring is not enough
  CHECK(hit(strs({"wrong", "Los Angeles Dodgers"}), gold) == 1);  // any prediction may match
  CHECK(hit({}, gold) == 0);
  CHECK(hit(strs({"anything"}), {}) == 0);

  std::vector<std::string> multi_gold{"1963 World Series", "1988 World Series"};
  CHECK(hit(strs({"1988 world series"}), multi_gold) == 1);
}

TEST_CASE("hit_at_2 considers only the top answer from each source") {
  std::vector<std::string> gold{"right"};
  CHECK(hit_at_2(strs({"right", "wrong"}), {}, gold) == 1);
  CHECK(hit_at_2(strs({"wrong", "right"}), {}, gold) == 0);  // second kg answer is ignored
  CHECK(hit_at_2(strs({"wrong"}), strs({"right"}), gold) == 1);
  CHECK(hit_at_2({}, strs({"right", "wrong"}), gold) == 1);
  CHECK(hit_at_2({}, strs({"wrong", "right"}), gold) == 0);
  CHECK(hit_at_2(strs({"wrong"}), strs({"also wrong"}), gold) == 0);
  CHECK(hit_at_2({}, {}, gold) == 0);
}

TEST_CASE("recall_at_k scans context items in accumulation order") {
  GraphStore store = dodgers();
  RetrievalContext ctx;
  ctx.add_triplet({"Stan Kasten", "people.person.nationality", "United States"}, Provenance::scoring);
  ctx.add_triplet({"m.0_yv0g3", "organization.leadership.organization", "Los Angeles Dodgers"},
                  Provenance::scoring);
  ctx.add_triplet({"Los Angeles Dodgers", "sports.sports_team.championships", "1988 World Series"},
                  Provenance::scoring);

  std::vector<std::string> gold{"los angeles dodgers"};
  CHECK(recall_at_k(ctx, store, gold, 1) == 0);  // first item mentions only Kasten and the US
  CHECK(recall_at_k(ctx, store, gold, 2) == 1);
  CHECK(recall_at_k(ctx, store, gold, 100) == 1);

  std::vector<std::string> missing{"1963 World Series"};
  CHECK(recall_at_k(ctx, store, missing, 100) == 0);

  // Relation labels are not answer surfaces; only endpoints count.
  std::vector<std::string> relation{"people.person.nationality"};
  CHECK(recall_at_k(ctx, store, relation, 100) == 0);

  CHECK_THROWS_AS(recall_at_k(ctx, store, gold, 0), std::invalid_argument);
  CHECK_THROWS_AS(recall_at_k(ctx, store, gold, -5), std::invalid_argument);

  // Monotone in k: once found at rank r, every k >= r still finds it.
  for (int k = 2; k <= 5; ++k) CHECK(recall_at_k(ctx, store, gold, k) == 1);
}

TEST_CASE("recall_at_k sees query result cells") {
  GraphStore store = dodgers();
  RetrievalContext ctx;
  cypher::QueryOutcome outcome = cypher::run_query_text(store, "MATCH (n) RETURN count(*) AS n");
  REQUIRE(outcome.ok());
  ctx.add_query_record("MATCH (n) RETURN count(*) AS n", outcome);
  std::vector<std::string> gold{"12"};
  CHECK(recall_at_k(ctx, store, gold, 1) == 1);
}

// --- batch evaluation ---------------------------------------------------------

namespace {

// One linker round plus a final answer; Q3 always fails its final call.
std::string scripted_eval_backend(const std::string& prompt) {
  bool final_stage = prompt.find("Task: Final Answer Generation") != std::string::npos;
  if (final_stage && prompt.find("Q3") != std::string::npos) throw TransportError("final call rejected");
  if (final_stage) return "<answers>\nLos Angeles Dodgers\n</answers>";
  if (prompt.find("Q3") != std::string::npos) return "<entities>\nFINISH\n</entities>";
  return "<entities>\nStan Kasten\n</entities>\n\n<answers>\nStan Kasten\n</answers>";
}

PipelineConfig eval_config() {
  PipelineConfig c;
  c.refinement_iterations = 1;
  c.link_top_m = 1;
  c.enable_paths = false;
  c.enable_query = false;
  c.enable_agentic = false;
  c.enable_scoring = true;
  return c;
}

std::vector<QaExample> eval_dataset() {
  return {
      {"ex1", "Q1 which team did stan kasten lead?", {"Los Angeles Dodgers"}, {}},
      {"ex2", "Q2 who plays in brooklyn?", {"Brooklyn Dodgers"}, {}},
      {"ex3", "Q3 what always fails?", {"nothing"}, {}},
  };
}

}  // namespace

TEST_CASE("batch evaluation aggregates exact means and tallies failures") {
  GraphStore store = dodgers();
  CallbackBackend backend(scripted_eval_backend);
  MetricReport report = evaluate_batch(eval_dataset(), store, backend, eval_config());

  CHECK(report.examples == 3);
  CHECK(report.errors == 1);
  CHECK(report.recall_k == 10);
  CHECK(report.hit_rate == 1.0 / 3.0);
  CHECK(report.hit_at_2_rate == 1.0 / 3.0);
  CHECK(report.recall_at_k_rate == 1.0 / 3.0);  // only ex1's gold entity is in the graph
  REQUIRE(report.per_example.size() == 3);

  const ExampleScore& ex1 = report.per_example[0];
  CHECK(ex1.id == "ex1");
  CHECK(ex1.hit == 1);
  CHECK(ex1.hit_at_2 == 1);
  CHECK(ex1.recall_at_k == 1);
  CHECK(ex1.llm_calls == 2);  // one linker call, one final call
  CHECK(ex1.answers == strs({"Los Angeles Dodgers"}));
  CHECK(ex1.draft_answers == strs({"Stan Kasten"}));
  CHECK_FALSE(ex1.error);

  const ExampleScore& ex2 = report.per_example[1];
  CHECK(ex2.id == "ex2");
  CHECK(ex2.hit == 0);         // gold names a team absent from graph and answers
  CHECK(ex2.recall_at_k == 0);  // so no context item can surface it

  const ExampleScore& ex3 = report.per_example[2];
  CHECK(ex3.id == "ex3");
  CHECK(ex3.error);
  CHECK(ex3.error_message == "final call rejected");
  CHECK(ex3.hit == 0);
  CHECK(ex3.hit_at_2 == 0);
  CHECK(ex3.recall_at_k == 0);
  CHECK(ex3.llm_calls == 3);  // linker + two failed final attempts
}

TEST_CASE("worker count changes throughput, not results") {
  GraphStore store = dodgers();
  CallbackBackend serial_backend(scripted_eval_backend);
  MetricReport serial = evaluate_batch(eval_dataset(), store, serial_backend, eval_config());

  CallbackBackend parallel_backend(scripted_eval_backend);
  EvalOptions options;
  options.workers = 3;
  MetricReport parallel = evaluate_batch(eval_dataset(), store, parallel_backend, eval_config(), options);

  CHECK(parallel.hit_rate == serial.hit_rate);
  CHECK(parallel.hit_at_2_rate == serial.hit_at_2_rate);
  CHECK(parallel.recall_at_k_rate == serial.recall_at_k_rate);
  CHECK(parallel.errors == serial.errors);
  REQUIRE(parallel.per_example.size() == serial.per_example.size());
  for (std::size_t i = 0; i < serial.per_example.size(); ++i) {
    CHECK(parallel.per_example[i].id == serial.per_example[i].id);  // dataset order survives
    CHECK(parallel.per_example[i].hit == serial.per_example[i].hit);
  }
}

TEST_CASE("batch evaluation validates its own options and config") {
  GraphStore store = dodgers();
  CallbackBackend backend(scripted_eval_backend);
  EvalOptions bad_workers;
  bad_workers.workers = 0;
  CHECK_THROWS_AS(evaluate_batch({}, store, backend, eval_config(), bad_workers), std::invalid_argument);
  EvalOptions bad_recall;
  bad_recall.recall_k = 0;
  CHECK_THROWS_AS(evaluate_batch({}, store, backend, eval_config(), bad_recall), std::invalid_argument);
  PipelineConfig bad_config = eval_config();
  bad_config.max_hops = 0;
  CHECK_THROWS_AS(evaluate_batch({}, store, backend, bad_config), ConfigError);
}

TEST_CASE("an empty dataset produces a zeroed report") {
  GraphStore store = dodgers();
  CallbackBackend backend(scripted_eval_backend);
  MetricReport report = evaluate_batch({}, store, backend, eval_config());
  CHECK(report.examples == 0);
  CHECK(report.errors == 0);
  CHECK(report.hit_rate == 0.0);
  CHECK(report.per_example.empty());
  CHECK(backend.call_log().size() == 0);
}

TEST_CASE("reports serialize with config echo and per-example jsonl") {
  GraphStore store = dodgers();
  CallbackBackend backend(scripted_eval_backend);
  PipelineConfig config = eval_config();
  MetricReport report = evaluate_batch(eval_dataset(), store, backend, config);

  json j = report.to_json();
  CHECK(j["examples"] == 3);
  CHECK(j["errors"] == 1);
  CHECK(j["config"] == config.to_json());
  REQUIRE(j["per_example"].size() == 3);
  CHECK(j["per_example"][0]["id"] == "ex1");
  CHECK_FALSE(j["per_example"][0].contains("error_message"));  // only failures carry one
  CHECK(j["per_example"][2]["error_message"] == "final call rejected");

  std::string jsonl = report.per_example_jsonl();
  std::size_t lines = std::count(jsonl.begin(), jsonl.end(), '\n');
  CHECK(lines == 3);
  json first = json::parse(jsonl.substr(0, jsonl.find('\n')));
  CHECK(first == report.per_example[0].to_json());
}
