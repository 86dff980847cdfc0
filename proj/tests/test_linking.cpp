#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "byokg/graph_store.hpp"
#include "byokg/linking.hpp"

using namespace byokg;

namespace {

const std::filesystem::path kFixtures = BYOKG_FIXTURES_DIR;

GraphStore random_store(std::mt19937& rng) {
  std::uniform_int_distribution<int> name_len(1, 8);
  std::uniform_int_distribution<int> letter(0, 25);
  std::set<std::string> names;
  while (names.size() < 12) {
    std::string n;
    for (int i = 0, len = name_len(rng); i < len; ++i) n.push_back(static_cast<char>('a' + letter(rng)));
    names.insert(n);  // distinct normalized keys by construction
  }
  std::vector<std::string> pool(names.begin(), names.end());
  GraphStore store;
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int i = 0; i < 20; ++i) store.add_triplet(pool[pick(rng)], "rel", pool[pick(rng)]);
  return store;
}

}  // namespace

TEST_CASE("string_link_score: exact normalized match scores 1") {
  CHECK(string_link_score("Los Angeles Dodgers", "los  angeles DODGERS") == 1.0);
  CHECK(string_link_score("café", "CAFÉ") == 1.0);
  // Token-subset mentions also reach 1.0, but only via the set ratio.
  CHECK(string_link_score("Los Angeles", "Los Angeles Dodgers") == 1.0);
  // Unrelated strings fall under the default 0.4 floor.
  CHECK(string_link_score("Stan Kasten", "United States") < 0.4);
}

TEST_CASE("string linking ranks country fixture mentions sensibly") {
  GraphStore store = load_triples_tsv(kFixtures / "jamaica.tsv");
  std::vector<Mention> mentions{{"Jamaican people", MentionSource::extracted}};
  std::vector<LinkedEntity> links = link_mentions(mentions, store, {});
  REQUIRE(links.size() == 3);
  CHECK(links[0].entity_id == "Jamaican English");
  CHECK(links[0].score == doctest::Approx(0.625));
  CHECK(links[1].entity_id == "Jamaican Creole English Language");
  CHECK(links[2].entity_id == "Jamaica");
  CHECK(links[0].rank == 1);
  CHECK(links[1].rank == 2);
  CHECK(links[2].rank == 3);
  for (const auto& le : links) {
    CHECK(le.method == LinkMethod::string_match);
    CHECK(le.mention.text == "Jamaican people");
    CHECK(le.score >= 0.4);  // floor respected
  }
}

TEST_CASE("an entity's own name always links to it at rank 1") {
  std::mt19937 rng(20260819);
  for (int trial = 0; trial < 50; ++trial) {
    GraphStore store = random_store(rng);
    for (const Entity& e : store.entities()) {
      std::vector<Mention> m{{e.name, MentionSource::extracted}};
      std::vector<LinkedEntity> links = link_mentions(m, store, {});
      REQUIRE(!links.empty());
      CHECK(links[0].entity_id == e.id);
      CHECK(links[0].score == 1.0);
      CHECK(links[0].rank == 1);
    }
  }
}

TEST_CASE("result count is bounded by mentions x top_m (x2 in both mode)") {
  std::mt19937 rng(7);
  Embedder embedder = hashing_embedder(32);
  for (int trial = 0; trial < 20; ++trial) {
    GraphStore store = random_store(rng);
    EmbeddingIndex index = EmbeddingIndex::build(store, embedder);
    // Mention texts contain spaces so they can't collide with the generated
    // single-token entity names (keeps the per-mention dedup check honest).
    std::vector<Mention> mentions{{"q q", MentionSource::extracted},
                                  {store.entities()[0].name, MentionSource::draft_answer},
                                  {"zzzz qqqq", MentionSource::extracted}};
    for (int top_m : {1, 2, 5}) {
      LinkOptions str_opts;
      str_opts.top_m = top_m;
      CHECK(link_mentions(mentions, store, str_opts).size() <= mentions.size() * top_m);

      LinkOptions both_opts;
      both_opts.top_m = top_m;
      both_opts.mode = LinkMode::both;
      both_opts.index = &index;
      both_opts.embedder = embedder;
      std::vector<LinkedEntity> merged = link_mentions(mentions, store, both_opts);
      CHECK(merged.size() <= 2 * mentions.size() * top_m);
      // No duplicate entity per mention after the merge.
      for (std::size_t i = 0; i < mentions.size(); ++i) {
        std::set<std::string> ids;
        for (const auto& le : merged) {
          if (le.mention.text != mentions[i].text) continue;
          CHECK(ids.insert(le.entity_id).second);
        }
      }
    }
  }
}

TEST_CASE("embedding mode ranks by cosine and clamps scores to [0, 1]") {
  GraphStore store = load_triples_tsv(kFixtures / "jamaica.tsv");
  Embedder embedder = hashing_embedder(64);
  EmbeddingIndex index = EmbeddingIndex::build(store, embedder);
  LinkOptions opts;
  opts.mode = LinkMode::embedding;
  opts.top_m = 4;
  opts.index = &index;
  opts.embedder = embedder;
  std::vector<Mention> mentions{{"Jamaica", MentionSource::extracted}};
  std::vector<LinkedEntity> links = link_mentions(mentions, store, opts);
  REQUIRE(links.size() == 4);
  CHECK(links[0].entity_id == "Jamaica");  // identical text -> cosine 1
  CHECK(links[0].score == doctest::Approx(1.0));
  for (std::size_t i = 0; i < links.size(); ++i) {
    CHECK(links[i].method == LinkMethod::embedding);
    CHECK(links[i].score >= 0.0);
    CHECK(links[i].score <= 1.0 + 1e-12);
    if (i > 0) CHECK(links[i].score <= links[i - 1].score);
  }
}

TEST_CASE("both mode keeps one record per entity, preferring the higher score") {
  GraphStore store = load_triples_tsv(kFixtures / "jamaica.tsv");
  Embedder embedder = hashing_embedder(64);
  EmbeddingIndex index = EmbeddingIndex::build(store, embedder);
  LinkOptions opts;
  opts.mode = LinkMode::both;
  opts.index = &index;
  opts.embedder = embedder;

  // Exact string match scores 1.0, so the surviving record stays string-typed.
  std::vector<LinkedEntity> exact = link_mentions(std::vector<Mention>{{"Jamaica", {}}}, store, opts);
  REQUIRE(!exact.empty());
  CHECK(exact[0].entity_id == "Jamaica");
  CHECK(exact[0].method == LinkMethod::string_match);
  CHECK(exact[0].score == 1.0);

  // A mention with no string candidate above the floor still links via embeddings.
  std::vector<LinkedEntity> fuzzy = link_mentions(std::vector<Mention>{{"xqzv", {}}}, store, opts);
  REQUIRE(!fuzzy.empty());
  for (const auto& le : fuzzy) CHECK(le.method == LinkMethod::embedding);
}

TEST_CASE("hashing embedder is deterministic and unit-norm") {
  Embedder embedder = hashing_embedder(48);
  std::vector<std::string> texts{"Jamaica", "jamaica", "Los Angeles Dodgers", "", "ab", "Thüringer"};
  auto a = embedder(texts);
  auto b = embedder(texts);
  CHECK(a == b);
  REQUIRE(a.size() == texts.size());
  for (const auto& v : a) {
    REQUIRE(v.size() == 48);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    CHECK(norm == doctest::Approx(1.0));
  }
  CHECK(a[0] == a[1]);    // case-folded before hashing
  CHECK(a[0] != a[2]);    // distinct text, distinct vector
  CHECK(a[3][0] == 1.0);  // degenerate (empty) input gets the fixed spike
  CHECK_THROWS_AS(hashing_embedder(0), LinkingError);
}

TEST_CASE("embedding index shares vectors across same-named entities") {
  GraphStore store;
  store.add_entity({"id1", "Shared Name", "", {}});
  store.add_entity({"id2", "Shared Name", "", {}});
  store.add_triplet("id1", "rel", "id2");
  EmbeddingIndex index = EmbeddingIndex::build(store, hashing_embedder(16));
  CHECK(index.size() == 2);
  CHECK(index.dimension() == 16);
  REQUIRE(index.vector_for("id1") != nullptr);
  CHECK(*index.vector_for("id1") == *index.vector_for("id2"));
  CHECK(index.vector_for("missing") == nullptr);
  CHECK(index.entity_ids() == std::vector<std::string>{"id1", "id2"});
}

TEST_CASE("embedding index build failures are reported with names") {
  GraphStore store;
  store.add_triplet("a", "rel", "b");
  CHECK_THROWS_AS(EmbeddingIndex::build(store, nullptr), IndexBuildError);
  // Wrong cardinality.
  Embedder short_embedder = [](const std::vector<std::string>&) { return std::vector<std::vector<double>>{}; };
  CHECK_THROWS_AS(EmbeddingIndex::build(store, short_embedder), IndexBuildError);
  // Empty vector for one name: the failure carries that name.
  Embedder holey = [](const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    for (const auto& t : texts) out.push_back(t == "b" ? std::vector<double>{} : std::vector<double>{1.0, 0.0});
    return out;
  };
  try {
    EmbeddingIndex::build(store, holey);
    FAIL("expected IndexBuildError");
  } catch (const IndexBuildError& e) {
    CHECK(e.failed_names == std::vector<std::string>{"b"});
  }
}

TEST_CASE("link option misuse throws") {
  GraphStore store;
  store.add_triplet("a", "rel", "b");
  std::vector<Mention> mentions{{"a", {}}};
  LinkOptions bad_m;
  bad_m.top_m = 0;
  CHECK_THROWS_AS(link_mentions(mentions, store, bad_m), LinkingError);
  LinkOptions no_index;
  no_index.mode = LinkMode::embedding;
  no_index.embedder = hashing_embedder(8);
  CHECK_THROWS_AS(link_mentions(mentions, store, no_index), LinkingError);
  EmbeddingIndex index = EmbeddingIndex::build(store, hashing_embedder(8));
  LinkOptions no_embedder;
  no_embedder.mode = LinkMode::embedding;
  no_embedder.index = &index;
  CHECK_THROWS_AS(link_mentions(mentions, store, no_embedder), LinkingError);
  // Dimension mismatch between mention embedder and index.
  LinkOptions mismatched;
  mismatched.mode = LinkMode::embedding;
  mismatched.index = &index;
  mismatched.embedder = hashing_embedder(16);
  CHECK_THROWS_AS(link_mentions(mentions, store, mismatched), LinkingError);
}

TEST_CASE("cosine and l2_normalize behave on edge cases") {
  CHECK(cosine({1.0, 0.0}, {1.0, 0.0}) == doctest::Approx(1.0));
  CHECK(cosine({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(0.0));
  CHECK(cosine({1.0, 0.0}, {-1.0, 0.0}) == doctest::Approx(-1.0));
  CHECK(cosine({}, {}) == 0.0);
  CHECK(cosine({1.0}, {1.0, 2.0}) == 0.0);  // dimension mismatch -> 0
  CHECK(cosine({0.0, 0.0}, {1.0, 0.0}) == 0.0);
  std::vector<double> v{3.0, 4.0};
  l2_normalize(v);
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(v[1] == doctest::Approx(0.8));
  std::vector<double> zero{0.0, 0.0};
  l2_normalize(zero);
  CHECK(zero == std::vector<double>{0.0, 0.0});
}
