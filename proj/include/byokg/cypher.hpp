#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "byokg/graph_store.hpp"

namespace byokg::cypher {

// --- values ------------------------------------------------------------

// Result cell: null, bool, number (all numerics are doubles), string, or a
// list (produced by collect()).
struct Value {
  using List = std::vector<Value>;
  std::variant<std::monostate, bool, double, std::string, List> data;

  Value() = default;
  Value(bool b) : data(b) {}
  Value(double d) : data(d) {}
  Value(const char* s) : data(std::string(s)) {}
  Value(std::string s) : data(std::move(s)) {}
  Value(List l) : data(std::move(l)) {}

  bool is_null() const { return std::holds_alternative<std::monostate>(data); }
  std::string to_string() const;  // null renders as empty string
  bool operator==(const Value&) const = default;
};

// Deterministic cross-type ordering for ORDER BY and min/max: numbers, then
// strings, then booleans, then lists, nulls always last.
bool value_less(const Value& a, const Value& b);

// --- errors ------------------------------------------------------------

enum class QueryErrorKind { empty_query, syntax, unbound_variable, unsupported_clause, unsupported_feature };

std::string_view to_string(QueryErrorKind kind);

struct QueryError {
  QueryErrorKind kind;
  std::string message;  // includes offending token text where applicable
  std::size_t position = 0;
};

class CypherError : public std::runtime_error {
 public:
  CypherError(QueryErrorKind kind, std::string message, std::size_t position);
  QueryErrorKind kind() const { return kind_; }
  std::size_t position() const { return position_; }

 private:
  QueryErrorKind kind_;
  std::size_t position_;
};

// --- abstract syntax -----------------------------------------------------

struct PropertyAccess {
  std::string var, key;
  bool operator==(const PropertyAccess&) const = default;
};

struct VariableRef {
  std::string var;
  bool operator==(const VariableRef&) const = default;
};

using Operand = std::variant<PropertyAccess, VariableRef, Value>;

enum class CmpOp { lt, le, eq, ne, ge, gt };

struct Comparison {
  Operand lhs;
  CmpOp op;
  Operand rhs;
  bool operator==(const Comparison&) const = default;
};

struct BoolExpr {
  enum class Kind { comparison, logical_and, logical_or, logical_not };
  Kind kind = Kind::comparison;
  std::optional<Comparison> comparison;  // Kind::comparison
  std::unique_ptr<BoolExpr> lhs, rhs;    // and/or both sides, not uses lhs

  bool operator==(const BoolExpr& other) const;
};

struct PropertyLiteral {
  std::string key;
  Value value;
  bool operator==(const PropertyLiteral&) const = default;
};

struct NodePattern {
  std::string var;    // empty = anonymous
  std::string label;  // empty = any type
  std::vector<PropertyLiteral> properties;
  bool operator==(const NodePattern&) const = default;
};

enum class EdgeDir { out, in, undirected };

struct EdgePattern {
  std::string var;
  std::string reltype;  // empty = any relation
  std::vector<PropertyLiteral> properties;
  EdgeDir direction = EdgeDir::out;
  bool operator==(const EdgePattern&) const = default;
};

struct PatternPath {
  std::vector<NodePattern> nodes;  // edges.size() + 1 of them
  std::vector<EdgePattern> edges;
  bool operator==(const PatternPath&) const = default;
};

enum class AggFn { none, avg, count, sum, min, max, collect };

struct ReturnItem {
  AggFn agg = AggFn::none;
  bool count_star = false;            // count(*)
  std::optional<Operand> operand;     // absent only for count(*)
  std::string alias;                  // output column name (defaulted when no AS)
  bool explicit_alias = false;
  bool operator==(const ReturnItem&) const = default;
};

struct OrderSpec {
  Operand operand;  // a bare VariableRef may also name an output column alias
  bool descending = false;
  bool operator==(const OrderSpec&) const = default;
};

struct QueryAst {
  std::vector<PatternPath> patterns;
  std::unique_ptr<BoolExpr> where;  // optional
  std::vector<ReturnItem> returns;
  std::optional<OrderSpec> order_by;
  std::optional<long long> limit;

  bool operator==(const QueryAst& other) const;
};

// --- operations ----------------------------------------------------------

// Parses one query in the supported subset; throws CypherError. Rejected
// inputs map to distinct error kinds: empty input, malformed syntax (with
// byte position and token), variables used but never bound in MATCH,
// unsupported clauses (CREATE, MERGE, WITH, ...), and unsupported features
// (DISTINCT, variable-length edges, multiple ORDER BY keys, ...).
QueryAst parse(std::string_view query);

// Canonical rendering; parse(to_text(ast)) reproduces an equal AST.
std::string to_text(const QueryAst& ast);

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;
  // Rows whose WHERE evaluation compared incompatible types (excluded rows
  // still count); also counts non-numeric inputs skipped by avg()/sum().
  std::size_t type_mismatch_warnings = 0;

  std::string to_tsv() const;  // header line, then one tab-separated line per row
};

// Evaluates the query against the store. Matching is exact on labels,
// relation types, and property values; bindings enumerate in entity/edge
// insertion order; edges bind at most once per MATCH (relationship
// isomorphism). An aggregate-only RETURN over zero matched rows yields a
// zero-row table rather than a single row of nulls.
ResultTable execute_query(const GraphStore& store, const QueryAst& ast);

struct QueryOutcome {
  std::optional<ResultTable> table;
  std::optional<QueryError> error;

  bool ok() const { return table.has_value(); }
  // "key: value" rows for results, "query returned no results" for empty
  // tables, "query error: ..." for failures — the text that joins the
  // retrieval context.
  std::string verbalize() const;
};

// parse + execute with errors captured instead of thrown.
QueryOutcome run_query_text(const GraphStore& store, std::string_view query);

}  // namespace byokg::cypher
