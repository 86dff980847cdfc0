#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "byokg/prompts.hpp"

using namespace byokg;

namespace {

// Writes a throwaway prompt-override directory and cleans it up afterwards.
struct TempPromptDir {
  std::filesystem::path dir;
  TempPromptDir() {
    std::random_device rd;
    dir = std::filesystem::temp_directory_path() / ("prompts_test_" + std::to_string(rd()));
    std::filesystem::create_directories(dir);
  }
  ~TempPromptDir() { std::filesystem::remove_all(dir); }
  void write(const std::string& name, const std::string& text) {
    std::ofstream out(dir / (name + ".txt"), std::ios::binary);
    out << text;
  }
};

}  // namespace

TEST_CASE("builtin library carries every pipeline template") {
  const PromptLibrary& lib = PromptLibrary::builtin();
  std::vector<std::string> expected{
      "draft_answer",       "entity_extraction", "entity_selection",  "final_answer",
      "kg_linker_footer",   "kg_linker_header",  "path_identification", "query_generation",
      "relation_selection", "relevant_entity_extraction"};
  CHECK(lib.names() == expected);
  for (const std::string& name : expected) {
    CAPTURE(name);
    CHECK(lib.has(name));
    CHECK(!lib.get(name).empty());
    // Stored trimmed: no trailing whitespace survives.
    CHECK(lib.get(name).back() != '\n');
    CHECK(lib.get(name).back() != ' ');
  }
  CHECK(!lib.has("nonexistent"));
  CHECK_THROWS_WITH_AS(lib.get("nonexistent"), doctest::Contains("nonexistent"), PromptError);
}

TEST_CASE("templates reference the placeholders their fillers provide") {
  const PromptLibrary& lib = PromptLibrary::builtin();
  for (const char* key : {"{question}", "{schema}", "{graph_context}"}) {
    CAPTURE(key);
    CHECK(lib.get("kg_linker_footer").find(key) != std::string::npos);
  }
  CHECK(lib.get("relation_selection").find("{entity}") != std::string::npos);
  CHECK(lib.get("relation_selection").find("{relations}") != std::string::npos);
  CHECK(lib.get("relation_selection").find("{question}") != std::string::npos);
  CHECK(lib.get("entity_selection").find("{context}") != std::string::npos);
  CHECK(lib.get("final_answer").find("{question}") != std::string::npos);
  CHECK(lib.get("final_answer").find("{graph_context}") != std::string::npos);
  CHECK(lib.get("query_generation").find("{query_language}") != std::string::npos);
}

TEST_CASE("directory overlay replaces named templates and keeps the rest") {
  TempPromptDir tmp;
  tmp.write("final_answer", "custom final answer {context}\n\n");
  tmp.write("extra_template", "wholly new");
  PromptLibrary lib = PromptLibrary::from_directory(tmp.dir);
  CHECK(lib.get("final_answer") == "custom final answer {context}");  // trimmed
  CHECK(lib.get("extra_template") == "wholly new");
  // Untouched builtin names remain available.
  CHECK(lib.get("entity_extraction") == PromptLibrary::builtin().get("entity_extraction"));
  CHECK(lib.names().size() == PromptLibrary::builtin().names().size() + 1);
}

TEST_CASE("overlaying a missing directory fails loudly") {
  CHECK_THROWS_AS(PromptLibrary::from_directory("/nonexistent/prompt/dir"), PromptError);
}

TEST_CASE("fill_template replaces every occurrence of each key") {
  CHECK(fill_template("Q: {question}\nagain: {question}", {{"question", "why?"}}) == "Q: why?\nagain: why?");
  CHECK(fill_template("{a}{b}{a}", {{"a", "1"}, {"b", "2"}}) == "121");
  CHECK(fill_template("no placeholders", {{"x", "y"}}) == "no placeholders");
  CHECK(fill_template("{unfilled} stays", {}) == "{unfilled} stays");
  // Keys substitute in list order, so an earlier value can be rewritten by a
  // later key; a value containing its own key is not re-expanded.
  CHECK(fill_template("{a}", {{"a", "{b}"}, {"b", "later"}}) == "later");
  CHECK(fill_template("{a}", {{"a", "{a}{a}"}}) == "{a}{a}");
  CHECK(fill_template("", {{"a", "1"}}) == "");
}
