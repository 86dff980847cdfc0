#include <doctest.h>

#include <filesystem>

#include "byokg/graph_store.hpp"
#include "byokg/kg_linker.hpp"
#include "byokg/llm_client.hpp"

using namespace byokg;

namespace {

const std::filesystem::path kFixtures = BYOKG_FIXTURES_DIR;

Schema jamaica_schema() { return load_triples_tsv(kFixtures / "jamaica.tsv").schema(); }

}  // namespace

TEST_CASE("the combined prompt carries all four task sections exactly once") {
  Schema schema = jamaica_schema();
  PromptBundle fresh = build_prompt("what language do Jamaican people speak?", schema, std::nullopt);

  auto count = [](const std::string& haystack, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
    return n;
  };
  CHECK(count(fresh.task_text, "Task: Entity Extraction") == 1);
  CHECK(count(fresh.task_text, "Task: Relationship Path Identification") == 1);
  CHECK(count(fresh.task_text, "Task: Graph Query Generation") == 1);
  CHECK(count(fresh.task_text, "Task: Question Answering") == 1);
  CHECK(count(fresh.task_text, "Task: Relevant Entity Extraction") == 0);

  // The full prompt embeds the question, the schema, and the task text.
  CHECK(fresh.text.find(fresh.task_text) != std::string::npos);
  CHECK(fresh.text.find("what language do Jamaican people speak?") != std::string::npos);
  CHECK(fresh.text.find("language_spoken") != std::string::npos);
  CHECK(fresh.context_text.empty());
  // No leftover placeholders.
  CHECK(fresh.text.find("{question}") == std::string::npos);
  CHECK(fresh.text.find("{schema}") == std::string::npos);
  CHECK(fresh.text.find("{graph_context}") == std::string::npos);
  CHECK(fresh.text.find("{query_language}") == std::string::npos);
  CHECK(fresh.text.find("openCypher") != std::string::npos);
}

TEST_CASE("context switches the entity task to relevant-entity selection") {
  Schema schema = jamaica_schema();
  PromptBundle round2 = build_prompt("q", schema, std::optional<std::string>{"Jamaica -> language_spoken -> X"});
  CHECK(round2.task_text.find("Task: Relevant Entity Extraction") != std::string::npos);
  // Unqualified extraction is gone (the qualified name is not a substring).
  CHECK(round2.task_text.find("Task: Entity Extraction") == std::string::npos);
  CHECK(round2.context_text == "Jamaica -> language_spoken -> X");
  CHECK(round2.text.find("Jamaica -> language_spoken -> X") != std::string::npos);
  // An empty context string behaves like no context.
  PromptBundle empty_ctx = build_prompt("q", schema, std::optional<std::string>{""});
  CHECK(empty_ctx.task_text.find("Task: Entity Extraction") != std::string::npos);
}

TEST_CASE("a custom query language is spliced into the query task") {
  LinkerOptions options;
  options.query_language = "SPARQL";
  PromptBundle bundle = build_prompt("q", jamaica_schema(), std::nullopt, options);
  CHECK(bundle.task_text.find("SPARQL") != std::string::npos);
}

TEST_CASE("extract_tag_block: case-insensitive, first block, unclosed runs to end") {
  CHECK(extract_tag_block("pre <Entities>a\nb</ENTITIES> post", "entities") == "a\nb");
  CHECK(extract_tag_block("<x>first</x><x>second</x>", "x") == "first");
  CHECK(extract_tag_block("<x>tail runs on", "x") == "tail runs on");
  CHECK(!extract_tag_block("no tags here", "x").has_value());
  CHECK(extract_tag_block("<x></x>", "x") == "");
}

TEST_CASE("parse_response pulls every artifact kind from one response") {
  GraphArtifacts a = parse_response(
      "Some preamble the model wrote.\n"
      "<entities>\nJamaica\n\nJamaica\nKingston\n</entities>\n"
      "<paths>\nlanguage_spoken\nlocation.country.capital -> location.location.containedby\n"
      "language_spoken\n</paths>\n"
      "<opencypher>\nMATCH (c) RETURN c LIMIT 1\n</opencypher>\n"
      "<answers>\nJamaican English\nJamaican English\nJamaican Creole\n</answers>\n"
      "Trailing commentary.");
  CHECK(a.entities == std::vector<std::string>{"Jamaica", "Kingston"});  // deduplicated
  REQUIRE(a.paths.size() == 2);  // duplicate chain dropped
  CHECK(a.paths[0].relations == std::vector<std::string>{"language_spoken"});
  CHECK(a.paths[1].relations ==
        std::vector<std::string>{"location.country.capital", "location.location.containedby"});
  CHECK(a.query == "MATCH (c) RETURN c LIMIT 1");
  CHECK(a.draft_answers == std::vector<std::string>{"Jamaican English", "Jamaican Creole"});
  CHECK(!a.finished);
}

TEST_CASE("parse_response FINISH handling") {
  GraphArtifacts done = parse_response("<entities>\n  FINISH  \n</entities>");
  CHECK(done.finished);
  CHECK(done.entities.empty());
  // FINISH among real entities is dropped, and the flag stays off.
  GraphArtifacts mixed = parse_response("<entities>\nJamaica\nFINISH\n</entities>");
  CHECK(!mixed.finished);
  CHECK(mixed.entities == std::vector<std::string>{"Jamaica"});
}

TEST_CASE("parse_response tolerates junk without throwing") {
  GraphArtifacts none = parse_response("The model rambled with no tags at all.");
  CHECK(none == GraphArtifacts{});
  GraphArtifacts blank = parse_response("<entities></entities><paths></paths><opencypher> </opencypher>");
  CHECK(blank.entities.empty());
  CHECK(blank.paths.empty());
  CHECK(!blank.query.has_value());  // whitespace-only query is no query
  // The singular <answer> tag is accepted as a fallback.
  GraphArtifacts single = parse_response("<answer>\n42\n</answer>");
  CHECK(single.draft_answers == std::vector<std::string>{"42"});
  // <answers> wins over <answer> when both appear.
  GraphArtifacts both = parse_response("<answer>\nfallback\n</answer>\n<answers>\nprimary\n</answers>");
  CHECK(both.draft_answers == std::vector<std::string>{"primary"});
  // Arrow debris in paths: empty segments vanish, lone arrows yield nothing.
  GraphArtifacts arrows = parse_response("<paths>\n-> -> ->\nrel1 ->\n-> rel2\n</paths>");
  REQUIRE(arrows.paths.size() == 2);
  CHECK(arrows.paths[0].relations == std::vector<std::string>{"rel1"});
  CHECK(arrows.paths[1].relations == std::vector<std::string>{"rel2"});
}

TEST_CASE("render_response round-trips through parse_response") {
  GraphArtifacts a;
  a.entities = {"Jamaica", "Kingston"};
  a.paths = {{{"language_spoken"}}, {{"location.country.capital", "location.location.containedby"}}};
  a.query = "MATCH (c) RETURN c LIMIT 1";
  a.draft_answers = {"Jamaican English"};
  CHECK(parse_response(render_response(a)) == a);

  GraphArtifacts finished;
  finished.finished = true;
  CHECK(parse_response(render_response(finished)) == finished);

  GraphArtifacts empty;
  CHECK(parse_response(render_response(empty)) == empty);
}

TEST_CASE("generate_artifacts drives one combined call with stage \"linker\"") {
  ScriptedBackend backend({ScriptEntry{ScriptEntry::Match::substring, "Task: Entity Extraction",
                                       "<entities>\nJamaica\n</entities>\n<paths>\nlanguage_spoken\n</paths>",
                                       std::nullopt}});
  GraphArtifacts a = generate_artifacts("q", jamaica_schema(), std::nullopt, backend);
  CHECK(a.entities == std::vector<std::string>{"Jamaica"});
  REQUIRE(backend.call_log().size() == 1);
  CHECK(backend.call_log().snapshot()[0].stage == "linker");
}

TEST_CASE("per-task mode asks once per section and merges the parts") {
  std::vector<ScriptEntry> entries;
  entries.push_back({ScriptEntry::Match::substring, "Task: Relevant Entity Extraction",
                     "<entities>\nKingston\n</entities>\n<answers>\nignored: wrong section\n</answers>",
                     std::nullopt});
  entries.push_back({ScriptEntry::Match::substring, "Task: Relationship Path Identification",
                     "<paths>\nlanguage_spoken\n</paths>", std::nullopt});
  entries.push_back({ScriptEntry::Match::substring, "Task: Graph Query Generation",
                     "<opencypher>\nMATCH (n) RETURN n\n</opencypher>", std::nullopt});
  entries.push_back({ScriptEntry::Match::substring, "Task: Question Answering",
                     "<answers>\nJamaican English\n</answers>", std::nullopt});
  ScriptedBackend backend(entries);
  LinkerOptions options;
  options.per_task_calls = true;
  GraphArtifacts a =
      generate_artifacts("q", jamaica_schema(), std::optional<std::string>{"some context"}, backend, options);
  CHECK(a.entities == std::vector<std::string>{"Kingston"});
  REQUIRE(a.paths.size() == 1);
  CHECK(a.query == "MATCH (n) RETURN n");
  // The entity round's stray answers block does not leak into the merge.
  CHECK(a.draft_answers == std::vector<std::string>{"Jamaican English"});
  REQUIRE(backend.call_log().size() == 4);
  CHECK(backend.call_log().snapshot()[0].stage == "linker.relevant_entity_extraction");
  CHECK(backend.call_log().snapshot()[1].stage == "linker.path_identification");
  CHECK(backend.call_log().snapshot()[2].stage == "linker.query_generation");
  CHECK(backend.call_log().snapshot()[3].stage == "linker.draft_answer");
}

TEST_CASE("transport failures are retried exactly once") {
  int calls = 0;
  CallbackBackend flaky([&calls](const std::string&) -> std::string {
    if (++calls == 1) throw TransportError("blip");
    return "<entities>\nJamaica\n</entities>";
  });
  GraphArtifacts a = generate_artifacts("q", jamaica_schema(), std::nullopt, flaky);
  CHECK(a.entities == std::vector<std::string>{"Jamaica"});
  CHECK(calls == 2);
  CHECK(flaky.call_log().size() == 2);  // the failure is logged too

  int doomed_calls = 0;
  CallbackBackend doomed([&doomed_calls](const std::string&) -> std::string {
    ++doomed_calls;
    throw TransportError("always down");
  });
  CHECK_THROWS_AS(generate_artifacts("q", jamaica_schema(), std::nullopt, doomed), TransportError);
  CHECK(doomed_calls == 2);  // one retry, then propagate
}
