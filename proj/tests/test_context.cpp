#include <doctest.h>

#include <filesystem>

#include "byokg/context.hpp"
#include "byokg/cypher.hpp"
#include "byokg/graph_store.hpp"

using namespace byokg;

namespace {

const std::filesystem::path kFixtures = BYOKG_FIXTURES_DIR;

const GraphStore& northwind() {
  static GraphStore store = load_graph_json(kFixtures / "northwind.json");
  return store;
}

Triplet chai_part_of{"prod_chai", "PART_OF", "cat_beverages"};
Triplet chang_part_of{"prod_chang", "PART_OF", "cat_beverages"};
GroundedPath chai_path{{"prod_chai", "cat_beverages"}, {"PART_OF"}, {HopDirection::forward}};

}  // namespace

TEST_CASE("additions deduplicate by value and report whether they were new") {
  RetrievalContext ctx;
  CHECK(ctx.empty());
  CHECK(ctx.add_triplet(chai_part_of, Provenance::agentic));
  CHECK(!ctx.add_triplet(chai_part_of, Provenance::scoring));  // same value, any provenance
  CHECK(ctx.add_path(chai_path, Provenance::follow));
  GroundedPath same_key = chai_path;
  same_key.directions = {HopDirection::inverse};  // identity ignores directions
  CHECK(!ctx.add_path(same_key, Provenance::shortest));
  cypher::QueryOutcome outcome = cypher::run_query_text(northwind(), "MATCH (c:Category) RETURN count(*) AS n");
  CHECK(ctx.add_query_record("q1", outcome));
  CHECK(!ctx.add_query_record("q1", outcome));
  CHECK(ctx.item_count() == 3);
  CHECK(!ctx.empty());
}

TEST_CASE("sequence numbers are global across item kinds") {
  RetrievalContext ctx;
  ctx.add_triplet(chai_part_of, Provenance::agentic);                           // seq 0
  ctx.add_path(chai_path, Provenance::follow);                                  // seq 1
  ctx.add_triplet(chang_part_of, Provenance::agentic);                          // seq 2
  ctx.add_query_record("q", cypher::run_query_text(northwind(), "MATCH (n) RETURN n LIMIT 1"));  // seq 3
  CHECK(ctx.triplets()[0].seq == 0);
  CHECK(ctx.paths()[0].seq == 1);
  CHECK(ctx.triplets()[1].seq == 2);
  CHECK(ctx.query_records()[0].seq == 3);
  // A rejected duplicate consumes no sequence number.
  ctx.add_triplet(chai_part_of, Provenance::agentic);
  Triplet fresh{"prod_konbu", "PART_OF", "cat_seafood"};
  ctx.add_triplet(fresh, Provenance::scoring);
  CHECK(ctx.triplets()[2].seq == 4);
}

TEST_CASE("triplet_values returns plain triplets in insertion order") {
  RetrievalContext ctx;
  ctx.add_triplet(chang_part_of, Provenance::scoring);
  ctx.add_triplet(chai_part_of, Provenance::agentic);
  ctx.add_path(chai_path, Provenance::follow);  // paths are not triplet values
  CHECK(ctx.triplet_values() == std::vector<Triplet>{chang_part_of, chai_part_of});
}

TEST_CASE("query records keep tables on success and notes on failure") {
  RetrievalContext ctx;
  ctx.add_query_record("good", cypher::run_query_text(northwind(), "MATCH (c:Category) RETURN count(*) AS n"));
  ctx.add_query_record("bad", cypher::run_query_text(northwind(), "MATCH ("));
  const auto& records = ctx.query_records();
  REQUIRE(records.size() == 2);
  REQUIRE(records[0].table.has_value());
  CHECK(records[0].table->rows[0][0] == cypher::Value(5.0));
  CHECK(!records[0].error_note.has_value());
  CHECK(!records[1].table.has_value());
  REQUIRE(records[1].error_note.has_value());
  CHECK(!records[1].error_note->empty());
}

TEST_CASE("render_query_record covers results, empty tables, and errors") {
  RetrievalContext ctx;
  ctx.add_query_record("MATCH (c:Category) WHERE c.categoryName = 'Seafood' RETURN c.categoryName",
                       cypher::run_query_text(northwind(),
                                              "MATCH (c:Category) WHERE c.categoryName = 'Seafood' "
                                              "RETURN c.categoryName"));
  ctx.add_query_record("none", cypher::run_query_text(northwind(), "MATCH (c:Category {categoryName: 'X'}) RETURN c"));
  ctx.add_query_record("broken", cypher::run_query_text(northwind(), "MATCH ("));
  CHECK(render_query_record(ctx.query_records()[0]) ==
        "query: MATCH (c:Category) WHERE c.categoryName = 'Seafood' RETURN c.categoryName\n"
        "result: c.categoryName: Seafood");
  CHECK(render_query_record(ctx.query_records()[1]) == "query: none\nresult: none");
  std::string broken = render_query_record(ctx.query_records()[2]);
  CHECK(broken.rfind("query: broken\nresult: error: ", 0) == 0);
}

TEST_CASE("ranked_items lists per-item display texts in insertion order") {
  RetrievalContext ctx;
  ctx.add_triplet(chai_part_of, Provenance::agentic);  // Chai, Beverages
  GroundedPath two_hop{{"ord_10248", "prod_chai", "cat_beverages"},
                       {"ORDERS", "PART_OF"},
                       {HopDirection::forward, HopDirection::forward}};
  ctx.add_path(two_hop, Provenance::shortest);  // endpoints only: Order 10248, Beverages
  ctx.add_query_record("q", cypher::run_query_text(
                                northwind(), "MATCH (p:Product) RETURN p.productName ORDER BY p.unitPrice LIMIT 2"));
  std::vector<RankedItem> items = ctx.ranked_items(northwind());
  REQUIRE(items.size() == 3);
  CHECK(items[0].seq == 0);
  CHECK(items[0].texts == std::vector<std::string>{"Chai", "Beverages"});
  CHECK(items[1].texts == std::vector<std::string>{"Order 10248", "Beverages"});
  CHECK(items[2].texts == std::vector<std::string>{"Geitost", "Konbu"});  // all result cells
}

TEST_CASE("verbalize renders triplet, path, and query sections in order") {
  RetrievalContext ctx;
  ctx.add_query_record("MATCH (c:Category) RETURN count(*) AS n",
                       cypher::run_query_text(northwind(), "MATCH (c:Category) RETURN count(*) AS n"));
  ctx.add_path(chai_path, Provenance::follow);
  ctx.add_triplet(chang_part_of, Provenance::agentic);
  ctx.add_triplet(chai_part_of, Provenance::agentic);
  // Triplets first (tail-merged per head+relation), then paths, then queries —
  // regardless of insertion interleaving.
  CHECK(ctx.verbalize(northwind()) ==
        "Chang -> PART_OF -> Beverages\n"
        "Chai -> PART_OF -> Beverages\n"
        "Chai -> PART_OF -> Beverages\n"
        "query: MATCH (c:Category) RETURN count(*) AS n\n"
        "result: n: 5");
}

TEST_CASE("token budgets keep query records first, then paths, then agent triplets") {
  RetrievalContext ctx;
  // scoring triplet (lowest priority), 5 tokens when rendered.
  ctx.add_triplet(chai_part_of, Provenance::scoring);
  // grounded path, 5 tokens.
  GroundedPath chang_path{{"prod_chang", "cat_beverages"}, {"PART_OF"}, {HopDirection::forward}};
  ctx.add_path(chang_path, Provenance::follow);
  // query record: "query: q" + "result: none" = 4 tokens.
  ctx.add_query_record("q", cypher::run_query_text(northwind(), "MATCH (c:Category {categoryName: 'X'}) RETURN c"));

  // Budget fits only the query record (4 tokens) plus the path (5 tokens).
  std::string nine = ctx.verbalize(northwind(), 9);
  CHECK(nine.find("query: q") != std::string::npos);
  CHECK(nine.find("Chang -> PART_OF -> Beverages") != std::string::npos);
  CHECK(nine.find("Chai") == std::string::npos);  // scoring triplet dropped

  // Budget of 4: only the query record makes it.
  std::string four = ctx.verbalize(northwind(), 4);
  CHECK(four == "query: q\nresult: none");

  // A too-big early item is skipped but smaller later ones still fit.
  std::string three = ctx.verbalize(northwind(), 3);
  CHECK(three.empty());  // nothing fits in 3 tokens

  // Unlimited budget includes everything.
  std::string all = ctx.verbalize(northwind(), 0);
  CHECK(all.find("Chai") != std::string::npos);
  CHECK(all.find("Chang") != std::string::npos);
  CHECK(all.find("query: q") != std::string::npos);
}

TEST_CASE("within a class the newest items win the budget") {
  RetrievalContext ctx;
  ctx.add_triplet(chai_part_of, Provenance::agentic);   // older
  ctx.add_triplet(chang_part_of, Provenance::agentic);  // newer
  // Each line is 5 tokens; budget admits exactly one.
  std::string out = ctx.verbalize(northwind(), 5);
  CHECK(out == "Chang -> PART_OF -> Beverages");
}

TEST_CASE("provenance labels render stably") {
  CHECK(to_string(Provenance::agentic) == "agentic");
  CHECK(to_string(Provenance::scoring) == "scoring");
  CHECK(to_string(Provenance::follow) == "follow");
  CHECK(to_string(Provenance::shortest) == "shortest");
  CHECK(to_string(Provenance::query) == "query");
}
