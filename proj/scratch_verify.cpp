// Scratch verification driver (not part of the build).
#include <cstdio>
#include <string>

#include "byokg/eval.hpp"
#include "byokg/graph_store.hpp"
#include "byokg/linking.hpp"
#include "byokg/llm_client.hpp"
#include "byokg/orchestrator.hpp"
#include "byokg/text.hpp"

using namespace byokg;

int main() {
  std::printf("--- token_set_ratio spot checks ---\n");
  auto tsr = [](const char* a, const char* b) {
    std::printf("tsr(%-24s vs %-28s) = %.4f\n", a, b, text::token_set_ratio(a, b));
  };
  tsr("Stan Kasten", "United States");
  tsr("Stan Kasten", "Los Angeles Dodgers");
  tsr("Stan Kasten", "National League");
  tsr("Stan Kasten", "m.0_yv0g3");
  tsr("Los Angeles Dodgers", "Los Angeles");
  tsr("Los Angeles Dodgers", "National League");
  tsr("Los Angeles Dodgers", "United States");
  tsr("m.0_yv0g3", "m.0_yv0g3");
  tsr("Jamaican people", "Jamaica");
  tsr("Jamaican people", "Jamaican English");
  tsr("Jamaican people", "Jamaican Creole English Language");
  tsr("Jamaican people", "Haitian Creole");
  tsr("Jamaican people", "Kingston");
  tsr("Jamaican people", "Caribbean");
  tsr("Jamaican people", "English Language");
  tsr("Jamaican people", "JMD");
  tsr("Jamaican people", "Haiti");

  std::printf("\n--- jamaica linking: mention \"Jamaican people\" (top_m=3) ---\n");
  GraphStore jam = load_triples_tsv("fixtures/jamaica.tsv", std::nullopt);
  {
    LinkOptions opts;  // defaults: string mode, top_m=3, floor 0.4
    std::vector<Mention> mentions{Mention{"Jamaican people", MentionSource::extracted}};
    auto linked = link_mentions(mentions, jam, opts);
    for (const auto& le : linked) {
      std::printf("rank %d: %-36s score=%.4f\n", le.rank, le.entity_id.c_str(), le.score);
    }
  }

  std::printf("\n--- dodgers linking: mention \"Los Angeles Dodgers\" (top_m=3) ---\n");
  GraphStore dod = load_triples_tsv("fixtures/dodgers.tsv", std::nullopt);
  {
    LinkOptions opts;
    std::vector<Mention> mentions{Mention{"Los Angeles Dodgers", MentionSource::extracted}};
    auto linked = link_mentions(mentions, dod, opts);
    for (const auto& le : linked) {
      std::printf("rank %d: %-24s score=%.4f\n", le.rank, le.entity_id.c_str(), le.score);
    }
  }

  std::printf("\n--- full dodgers replay ---\n");
  auto backend = ScriptedBackend::from_file("fixtures/scripts/cwq_dodgers.script");
  PipelineConfig config;
  config.enable_scoring = false;
  config.enable_query = false;
  config.link_top_m = 1;
  Pipeline pipeline(dod, *backend, config);
  std::vector<std::string> seeds{"Stan Kasten"};
  PipelineResult result =
      pipeline.run("In what years did the baseball team led by Stan Kasten win the World Series?", seeds);
  std::printf("ok=%d error=%s\n", result.ok() ? 1 : 0, result.error ? result.error->c_str() : "(none)");
  std::printf("llm_calls=%zu\n", call_budget_used(result.trace));
  for (const auto& a : result.answers) std::printf("answer: %s\n", a.c_str());
  std::printf("--- trace ---\n%s\n", result.trace.to_jsonl().c_str());
  return 0;
}
