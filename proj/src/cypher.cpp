#include "byokg/cypher.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "byokg/text.hpp"

namespace byokg::cypher {

namespace {

std::string format_number(double d) {
  if (d == static_cast<long long>(d) && std::abs(d) < 1e15) {
    return std::to_string(static_cast<long long>(d));
  }
  std::ostringstream os;
  os.precision(15);
  os << d;
  return os.str();
}

}  // namespace

std::string Value::to_string() const {
  if (is_null()) return "";
  if (const auto* b = std::get_if<bool>(&data)) return *b ? "true" : "false";
  if (const auto* d = std::get_if<double>(&data)) return format_number(*d);
  if (const auto* s = std::get_if<std::string>(&data)) return *s;
  const List& l = std::get<List>(data);
  std::string out = "[";
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (i) out += ", ";
    out += l[i].to_string();
  }
  return out + "]";
}

namespace {

int type_rank(const Value& v) {
  if (std::holds_alternative<double>(v.data)) return 0;
  if (std::holds_alternative<std::string>(v.data)) return 1;
  if (std::holds_alternative<bool>(v.data)) return 2;
  if (std::holds_alternative<Value::List>(v.data)) return 3;
  return 4;  // null last
}

}  // namespace

bool value_less(const Value& a, const Value& b) {
  int ra = type_rank(a), rb = type_rank(b);
  if (ra != rb) return ra < rb;
  switch (ra) {
    case 0:
      return std::get<double>(a.data) < std::get<double>(b.data);
    case 1:
      return std::get<std::string>(a.data) < std::get<std::string>(b.data);
    case 2:
      return !std::get<bool>(a.data) && std::get<bool>(b.data);
    case 3: {
      const auto& la = std::get<Value::List>(a.data);
      const auto& lb = std::get<Value::List>(b.data);
      return std::lexicographical_compare(la.begin(), la.end(), lb.begin(), lb.end(), value_less);
    }
    default:
      return false;
  }
}

std::string_view to_string(QueryErrorKind kind) {
  switch (kind) {
    case QueryErrorKind::empty_query:
      return "empty query";
    case QueryErrorKind::syntax:
      return "syntax error";
    case QueryErrorKind::unbound_variable:
      return "unbound variable";
    case QueryErrorKind::unsupported_clause:
      return "unsupported clause";
    case QueryErrorKind::unsupported_feature:
      return "unsupported feature";
  }
  return "error";
}

CypherError::CypherError(QueryErrorKind kind, std::string message, std::size_t position)
    : std::runtime_error(std::string(to_string(kind)) + " at position " + std::to_string(position) + ": " + message),
      kind_(kind),
      position_(position) {}

bool BoolExpr::operator==(const BoolExpr& other) const {
  if (kind != other.kind) return false;
  if (kind == Kind::comparison) return comparison == other.comparison;
  auto eq = [](const std::unique_ptr<BoolExpr>& a, const std::unique_ptr<BoolExpr>& b) {
    if (!a || !b) return !a && !b;
    return *a == *b;
  };
  return eq(lhs, other.lhs) && eq(rhs, other.rhs);
}

bool QueryAst::operator==(const QueryAst& other) const {
  auto eq = [](const std::unique_ptr<BoolExpr>& a, const std::unique_ptr<BoolExpr>& b) {
    if (!a || !b) return !a && !b;
    return *a == *b;
  };
  return patterns == other.patterns && eq(where, other.where) && returns == other.returns &&
         order_by == other.order_by && limit == other.limit;
}

// --- lexer -----------------------------------------------------------------

namespace {

enum class TokKind { ident, backtick_ident, string, number, punct, end };

struct Token {
  TokKind kind;
  std::string text;      // decoded for strings/backticks
  double number = 0.0;   // for TokKind::number
  std::size_t position;  // byte offset in the source
};

[[noreturn]] void fail(QueryErrorKind kind, const std::string& message, std::size_t position) {
  throw CypherError(kind, message, position);
}

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      tokens.push_back({TokKind::ident, std::string(src.substr(i, j - i)), 0.0, start});
      i = j;
      continue;
    }
    if (c == '`') {
      std::size_t j = i + 1;
      std::string out;
      while (j < src.size() && src[j] != '`') out.push_back(src[j++]);
      if (j >= src.size()) fail(QueryErrorKind::syntax, "unterminated backtick identifier", start);
      tokens.push_back({TokKind::backtick_ident, std::move(out), 0.0, start});
      i = j + 1;
      continue;
    }
    if (c == '\'' || c == '"') {
      char quote = c;
      std::size_t j = i + 1;
      std::string out;
      while (j < src.size() && src[j] != quote) {
        if (src[j] == '\\' && j + 1 < src.size()) {
          char esc = src[j + 1];
          if (esc == 'n') {
            out.push_back('\n');
          } else if (esc == 't') {
            out.push_back('\t');
          } else {
            out.push_back(esc);
          }
          j += 2;
        } else {
          out.push_back(src[j++]);
        }
      }
      if (j >= src.size()) fail(QueryErrorKind::syntax, "unterminated string literal", start);
      tokens.push_back({TokKind::string, std::move(out), 0.0, start});
      i = j + 1;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      if (j < src.size() && src[j] == '.' && j + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      }
      std::string num(src.substr(i, j - i));
      tokens.push_back({TokKind::number, num, std::stod(num), start});
      i = j;
      continue;
    }
    // Two-character comparison operators first.
    if (i + 1 < src.size()) {
      std::string_view two = src.substr(i, 2);
      if (two == "<>" || two == "<=" || two == ">=") {
        tokens.push_back({TokKind::punct, std::string(two), 0.0, start});
        i += 2;
        continue;
      }
    }
    static const std::string singles = "()[]{}:,.=<>-+*;|";
    if (singles.find(c) != std::string::npos) {
      tokens.push_back({TokKind::punct, std::string(1, c), 0.0, start});
      ++i;
      continue;
    }
    fail(QueryErrorKind::syntax, "unexpected character '" + std::string(1, c) + "'", start);
  }
  tokens.push_back({TokKind::end, "", 0.0, src.size()});
  return tokens;
}

// --- parser ----------------------------------------------------------------

const std::set<std::string>& unsupported_clauses() {
  static const std::set<std::string> clauses = {"CREATE", "MERGE",  "DELETE", "DETACH", "SET",  "REMOVE",
                                                "WITH",   "UNWIND", "CALL",   "FOREACH", "LOAD", "USING",
                                                "UNION",  "SKIP"};
  return clauses;
}

const std::set<std::string>& reserved_words() {
  static const std::set<std::string> words = {"MATCH", "WHERE", "RETURN", "ORDER", "BY",    "ASC",  "DESC",
                                              "LIMIT", "AS",    "AND",    "OR",    "NOT",   "TRUE", "FALSE",
                                              "NULL",  "DISTINCT", "OPTIONAL"};
  return words;
}

bool is_agg_name(const std::string& upper) {
  return upper == "AVG" || upper == "COUNT" || upper == "SUM" || upper == "MIN" || upper == "MAX" ||
         upper == "COLLECT";
}

AggFn agg_from_name(const std::string& upper) {
  if (upper == "AVG") return AggFn::avg;
  if (upper == "COUNT") return AggFn::count;
  if (upper == "SUM") return AggFn::sum;
  if (upper == "MIN") return AggFn::min;
  if (upper == "MAX") return AggFn::max;
  return AggFn::collect;
}

std::string upper_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : tokens_(lex(src)) {}

  QueryAst parse_query() {
    QueryAst ast;
    expect_clause("MATCH");
    ast.patterns.push_back(parse_pattern_path());
    while (accept_punct(",")) ast.patterns.push_back(parse_pattern_path());
    if (at_keyword("WHERE")) {
      advance();
      ast.where = parse_or_expr();
    }
    reject_unsupported_here();
    expect_clause("RETURN");
    if (at_keyword("DISTINCT")) {
      fail(QueryErrorKind::unsupported_feature, "DISTINCT is not supported", cur().position);
    }
    ast.returns.push_back(parse_return_item());
    while (accept_punct(",")) ast.returns.push_back(parse_return_item());
    if (at_keyword("ORDER")) {
      advance();
      if (!at_keyword("BY")) fail(QueryErrorKind::syntax, "expected BY after ORDER", cur().position);
      advance();
      OrderSpec spec;
      spec.operand = parse_operand();
      if (at_keyword("ASC")) {
        advance();
      } else if (at_keyword("DESC")) {
        advance();
        spec.descending = true;
      }
      if (at_punct(",")) {
        fail(QueryErrorKind::unsupported_feature, "multiple ORDER BY keys are not supported", cur().position);
      }
      ast.order_by = std::move(spec);
    }
    if (at_keyword("LIMIT")) {
      advance();
      if (cur().kind != TokKind::number) {
        fail(QueryErrorKind::syntax, "expected a number after LIMIT, got \"" + cur().text + "\"", cur().position);
      }
      double limit = cur().number;
      if (limit < 0 || limit != std::floor(limit)) {
        fail(QueryErrorKind::syntax, "LIMIT must be a non-negative integer", cur().position);
      }
      ast.limit = static_cast<long long>(limit);
      advance();
    }
    accept_punct(";");
    reject_unsupported_here();
    if (cur().kind != TokKind::end) {
      fail(QueryErrorKind::syntax, "unexpected trailing input \"" + cur().text + "\"", cur().position);
    }
    check_bindings(ast);
    return ast;
  }

 private:
  const Token& cur() const { return tokens_[pos_]; }
  void advance() { ++pos_; }

  bool at_punct(std::string_view p) const { return cur().kind == TokKind::punct && cur().text == p; }
  bool accept_punct(std::string_view p) {
    if (!at_punct(p)) return false;
    advance();
    return true;
  }
  void expect_punct(std::string_view p) {
    if (!accept_punct(p)) {
      fail(QueryErrorKind::syntax, "expected \"" + std::string(p) + "\", got \"" + cur().text + "\"", cur().position);
    }
  }

  bool at_keyword(std::string_view kw) const {
    return cur().kind == TokKind::ident && upper_ascii(cur().text) == kw;
  }

  void reject_unsupported_here() {
    if (cur().kind != TokKind::ident) return;
    std::string upper = upper_ascii(cur().text);
    if (unsupported_clauses().count(upper)) {
      fail(QueryErrorKind::unsupported_clause, upper + " is not supported", cur().position);
    }
    if (upper == "OPTIONAL") {
      fail(QueryErrorKind::unsupported_clause, "OPTIONAL MATCH is not supported", cur().position);
    }
  }

  void expect_clause(std::string_view kw) {
    reject_unsupported_here();
    if (!at_keyword(kw)) {
      fail(QueryErrorKind::syntax, "expected " + std::string(kw) + ", got \"" + cur().text + "\"", cur().position);
    }
    advance();
  }

  // An identifier usable as a variable/label/property name. Backticks allow
  // exotic characters (dotted relation names). Reserved words are rejected as
  // variables, where they would shadow clause keywords, but allowed where the
  // grammar position is unambiguous: labels, relationship types, and property
  // keys (so a label like `Order` works without backticks).
  std::string parse_name(const char* what, bool allow_reserved = false) {
    if (cur().kind == TokKind::backtick_ident) {
      std::string name = cur().text;
      advance();
      return name;
    }
    if (cur().kind == TokKind::ident) {
      std::string upper = upper_ascii(cur().text);
      if (!allow_reserved && (reserved_words().count(upper) || unsupported_clauses().count(upper))) {
        fail(QueryErrorKind::syntax, std::string("reserved word \"") + cur().text + "\" cannot be used as " + what,
             cur().position);
      }
      std::string name = cur().text;
      advance();
      return name;
    }
    fail(QueryErrorKind::syntax, std::string("expected ") + what + ", got \"" + cur().text + "\"", cur().position);
  }

  Value parse_literal() {
    if (cur().kind == TokKind::string) {
      Value v(cur().text);
      advance();
      return v;
    }
    if (cur().kind == TokKind::number) {
      Value v(cur().number);
      advance();
      return v;
    }
    if (at_punct("-")) {
      advance();
      if (cur().kind != TokKind::number) {
        fail(QueryErrorKind::syntax, "expected a number after unary minus", cur().position);
      }
      Value v(-cur().number);
      advance();
      return v;
    }
    if (at_keyword("TRUE")) {
      advance();
      return Value(true);
    }
    if (at_keyword("FALSE")) {
      advance();
      return Value(false);
    }
    if (at_keyword("NULL")) {
      advance();
      return Value();
    }
    fail(QueryErrorKind::syntax, "expected a literal value, got \"" + cur().text + "\"", cur().position);
  }

  std::vector<PropertyLiteral> parse_property_map() {
    std::vector<PropertyLiteral> props;
    expect_punct("{");
    if (!at_punct("}")) {
      do {
        PropertyLiteral p;
        p.key = parse_name("a property key", true);
        expect_punct(":");
        p.value = parse_literal();
        props.push_back(std::move(p));
      } while (accept_punct(","));
    }
    expect_punct("}");
    return props;
  }

  NodePattern parse_node_pattern() {
    NodePattern node;
    expect_punct("(");
    if (cur().kind == TokKind::ident || cur().kind == TokKind::backtick_ident) {
      node.var = parse_name("a node variable");
    }
    if (accept_punct(":")) {
      node.label = parse_name("a node label", true);
      if (at_punct(":")) {
        fail(QueryErrorKind::unsupported_feature, "multiple node labels are not supported", cur().position);
      }
    }
    if (at_punct("{")) node.properties = parse_property_map();
    expect_punct(")");
    return node;
  }

  // Parses the relationship part between two nodes. Returns false when the
  // next token does not begin an edge.
  bool parse_edge_pattern(EdgePattern& edge) {
    bool leading_arrow_in = false;
    if (at_punct("<")) {
      advance();
      expect_punct("-");
      leading_arrow_in = true;
    } else if (at_punct("-")) {
      advance();
    } else {
      return false;
    }
    if (at_punct("[")) {
      advance();
      if (at_punct("*")) {
        fail(QueryErrorKind::unsupported_feature, "variable-length relationships are not supported", cur().position);
      }
      if (cur().kind == TokKind::ident || cur().kind == TokKind::backtick_ident) {
        edge.var = parse_name("a relationship variable");
      }
      if (accept_punct(":")) {
        edge.reltype = parse_name("a relationship type", true);
        if (at_punct("|")) {
          fail(QueryErrorKind::unsupported_feature, "alternative relationship types are not supported",
               cur().position);
        }
      }
      if (at_punct("*")) {
        fail(QueryErrorKind::unsupported_feature, "variable-length relationships are not supported", cur().position);
      }
      if (at_punct("{")) edge.properties = parse_property_map();
      expect_punct("]");
    }
    expect_punct("-");
    bool trailing_arrow_out = false;
    if (at_punct(">")) {
      advance();
      trailing_arrow_out = true;
    }
    if (leading_arrow_in && trailing_arrow_out) {
      fail(QueryErrorKind::syntax, "relationship cannot point both ways", cur().position);
    }
    edge.direction = leading_arrow_in ? EdgeDir::in : (trailing_arrow_out ? EdgeDir::out : EdgeDir::undirected);
    return true;
  }

  PatternPath parse_pattern_path() {
    PatternPath path;
    path.nodes.push_back(parse_node_pattern());
    EdgePattern edge;
    while (parse_edge_pattern(edge)) {
      path.edges.push_back(std::move(edge));
      edge = EdgePattern{};
      path.nodes.push_back(parse_node_pattern());
    }
    return path;
  }

  Operand parse_operand() {
    if (cur().kind == TokKind::ident) {
      std::string upper = upper_ascii(cur().text);
      if (upper == "TRUE" || upper == "FALSE" || upper == "NULL") return parse_literal();
    }
    if (cur().kind == TokKind::ident || cur().kind == TokKind::backtick_ident) {
      std::string var = parse_name("a variable");
      if (accept_punct(".")) {
        std::string key = parse_name("a property key", true);
        return PropertyAccess{std::move(var), std::move(key)};
      }
      return VariableRef{std::move(var)};
    }
    return parse_literal();
  }

  CmpOp parse_cmp_op() {
    if (cur().kind != TokKind::punct) {
      fail(QueryErrorKind::syntax, "expected a comparison operator, got \"" + cur().text + "\"", cur().position);
    }
    std::string op = cur().text;
    CmpOp out;
    if (op == "<") {
      out = CmpOp::lt;
    } else if (op == "<=") {
      out = CmpOp::le;
    } else if (op == "=") {
      out = CmpOp::eq;
    } else if (op == "<>") {
      out = CmpOp::ne;
    } else if (op == ">=") {
      out = CmpOp::ge;
    } else if (op == ">") {
      out = CmpOp::gt;
    } else {
      fail(QueryErrorKind::syntax, "expected a comparison operator, got \"" + op + "\"", cur().position);
    }
    advance();
    return out;
  }

  std::unique_ptr<BoolExpr> parse_or_expr() {
    auto lhs = parse_and_expr();
    while (at_keyword("OR")) {
      advance();
      auto node = std::make_unique<BoolExpr>();
      node->kind = BoolExpr::Kind::logical_or;
      node->lhs = std::move(lhs);
      node->rhs = parse_and_expr();
      lhs = std::move(node);
    }
    return lhs;
  }

  std::unique_ptr<BoolExpr> parse_and_expr() {
    auto lhs = parse_not_expr();
    while (at_keyword("AND")) {
      advance();
      auto node = std::make_unique<BoolExpr>();
      node->kind = BoolExpr::Kind::logical_and;
      node->lhs = std::move(lhs);
      node->rhs = parse_not_expr();
      lhs = std::move(node);
    }
    return lhs;
  }

  std::unique_ptr<BoolExpr> parse_not_expr() {
    if (at_keyword("NOT")) {
      advance();
      auto node = std::make_unique<BoolExpr>();
      node->kind = BoolExpr::Kind::logical_not;
      node->lhs = parse_not_expr();
      return node;
    }
    if (at_punct("(")) {
      advance();
      auto inner = parse_or_expr();
      expect_punct(")");
      return inner;
    }
    auto node = std::make_unique<BoolExpr>();
    node->kind = BoolExpr::Kind::comparison;
    Comparison cmp;
    cmp.lhs = parse_operand();
    cmp.op = parse_cmp_op();
    cmp.rhs = parse_operand();
    node->comparison = std::move(cmp);
    return node;
  }

  ReturnItem parse_return_item() {
    ReturnItem item;
    std::size_t start_pos = cur().position;
    if (cur().kind == TokKind::ident && is_agg_name(upper_ascii(cur().text)) && tokens_[pos_ + 1].kind == TokKind::punct &&
        tokens_[pos_ + 1].text == "(") {
      std::string fn = upper_ascii(cur().text);
      item.agg = agg_from_name(fn);
      advance();
      expect_punct("(");
      if (at_keyword("DISTINCT")) {
        fail(QueryErrorKind::unsupported_feature, "DISTINCT aggregates are not supported", cur().position);
      }
      if (at_punct("*")) {
        if (item.agg != AggFn::count) {
          fail(QueryErrorKind::syntax, "only count(*) may aggregate over *", cur().position);
        }
        item.count_star = true;
        advance();
      } else {
        item.operand = parse_operand();
      }
      expect_punct(")");
    } else {
      item.operand = parse_operand();
    }
    if (at_keyword("AS")) {
      advance();
      item.alias = parse_name("an alias");
      item.explicit_alias = true;
    } else {
      item.alias = default_alias(item);
    }
    (void)start_pos;
    return item;
  }

  std::string default_alias(const ReturnItem& item) const;

  // Every variable referenced anywhere must be bound by a MATCH pattern.
  void check_bindings(const QueryAst& ast) {
    std::set<std::string> bound;
    for (const auto& path : ast.patterns) {
      for (const auto& n : path.nodes) {
        if (!n.var.empty()) bound.insert(n.var);
      }
      for (const auto& e : path.edges) {
        if (!e.var.empty()) bound.insert(e.var);
      }
    }
    std::set<std::string> aliases;
    for (const auto& item : ast.returns) aliases.insert(item.alias);
    auto check_operand = [&](const Operand& op, bool allow_alias) {
      const std::string* var = nullptr;
      if (const auto* pa = std::get_if<PropertyAccess>(&op)) var = &pa->var;
      if (const auto* vr = std::get_if<VariableRef>(&op)) {
        if (allow_alias && aliases.count(vr->var)) return;
        var = &vr->var;
      }
      if (var && !bound.count(*var)) {
        fail(QueryErrorKind::unbound_variable, "variable \"" + *var + "\" is not bound in MATCH", 0);
      }
    };
    std::function<void(const BoolExpr&)> walk = [&](const BoolExpr& e) {
      if (e.kind == BoolExpr::Kind::comparison) {
        check_operand(e.comparison->lhs, false);
        check_operand(e.comparison->rhs, false);
        return;
      }
      if (e.lhs) walk(*e.lhs);
      if (e.rhs) walk(*e.rhs);
    };
    if (ast.where) walk(*ast.where);
    for (const auto& item : ast.returns) {
      if (item.operand) check_operand(*item.operand, false);
    }
    if (ast.order_by) check_operand(ast.order_by->operand, true);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

bool plain_identifier(std::string_view name) {
  if (name.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(name[0])) && name[0] != '_') return false;
  for (char c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  }
  return !reserved_words().count(upper_ascii(name)) && !unsupported_clauses().count(upper_ascii(name)) &&
         !is_agg_name(upper_ascii(name));
}

std::string render_name(std::string_view name) {
  if (plain_identifier(name)) return std::string(name);
  return "`" + std::string(name) + "`";
}

std::string render_value(const Value& v) {
  if (v.is_null()) return "null";
  if (const auto* b = std::get_if<bool>(&v.data)) return *b ? "true" : "false";
  if (const auto* d = std::get_if<double>(&v.data)) return format_number(*d);
  if (const auto* s = std::get_if<std::string>(&v.data)) {
    std::string out = "'";
    for (char c : *s) {
      if (c == '\\' || c == '\'') out.push_back('\\');
      if (c == '\n') {
        out += "\\n";
        continue;
      }
      out.push_back(c);
    }
    return out + "'";
  }
  // Lists are not expressible as literals in the subset.
  return "[]";
}

std::string render_operand(const Operand& op) {
  if (const auto* pa = std::get_if<PropertyAccess>(&op)) return render_name(pa->var) + "." + render_name(pa->key);
  if (const auto* vr = std::get_if<VariableRef>(&op)) return render_name(vr->var);
  return render_value(std::get<Value>(op));
}

std::string agg_name(AggFn fn) {
  switch (fn) {
    case AggFn::avg:
      return "avg";
    case AggFn::count:
      return "count";
    case AggFn::sum:
      return "sum";
    case AggFn::min:
      return "min";
    case AggFn::max:
      return "max";
    case AggFn::collect:
      return "collect";
    default:
      return "";
  }
}

std::string render_return_expr(const ReturnItem& item) {
  if (item.agg == AggFn::none) return render_operand(*item.operand);
  if (item.count_star) return "count(*)";
  return agg_name(item.agg) + "(" + render_operand(*item.operand) + ")";
}

}  // namespace

std::string Parser::default_alias(const ReturnItem& item) const { return render_return_expr(item); }

QueryAst parse(std::string_view query) {
  bool blank = true;
  for (char c : query) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      blank = false;
      break;
    }
  }
  if (blank) fail(QueryErrorKind::empty_query, "query text is empty", 0);
  Parser parser(query);
  return parser.parse_query();
}

namespace {

std::string render_properties(const std::vector<PropertyLiteral>& props) {
  if (props.empty()) return "";
  std::string out = " {";
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (i) out += ", ";
    out += render_name(props[i].key) + ": " + render_value(props[i].value);
  }
  return out + "}";
}

std::string render_node(const NodePattern& n) {
  std::string out = "(" + (n.var.empty() ? "" : render_name(n.var));
  if (!n.label.empty()) out += ":" + render_name(n.label);
  out += render_properties(n.properties);
  return out + ")";
}

std::string render_edge(const EdgePattern& e) {
  std::string inner;
  if (!e.var.empty() || !e.reltype.empty() || !e.properties.empty()) {
    inner = "[" + (e.var.empty() ? "" : render_name(e.var));
    if (!e.reltype.empty()) inner += ":" + render_name(e.reltype);
    inner += render_properties(e.properties);
    inner += "]";
  }
  switch (e.direction) {
    case EdgeDir::out:
      return "-" + inner + "->";
    case EdgeDir::in:
      return "<-" + inner + "-";
    default:
      return "-" + inner + "-";
  }
}

std::string cmp_op_text(CmpOp op) {
  switch (op) {
    case CmpOp::lt:
      return "<";
    case CmpOp::le:
      return "<=";
    case CmpOp::eq:
      return "=";
    case CmpOp::ne:
      return "<>";
    case CmpOp::ge:
      return ">=";
    default:
      return ">";
  }
}

std::string render_bool(const BoolExpr& e) {
  switch (e.kind) {
    case BoolExpr::Kind::comparison:
      return render_operand(e.comparison->lhs) + " " + cmp_op_text(e.comparison->op) + " " +
             render_operand(e.comparison->rhs);
    case BoolExpr::Kind::logical_not:
      return "NOT (" + render_bool(*e.lhs) + ")";
    case BoolExpr::Kind::logical_and:
      return "(" + render_bool(*e.lhs) + " AND " + render_bool(*e.rhs) + ")";
    default:
      return "(" + render_bool(*e.lhs) + " OR " + render_bool(*e.rhs) + ")";
  }
}

}  // namespace

std::string to_text(const QueryAst& ast) {
  std::string out = "MATCH ";
  for (std::size_t p = 0; p < ast.patterns.size(); ++p) {
    if (p) out += ", ";
    const PatternPath& path = ast.patterns[p];
    out += render_node(path.nodes[0]);
    for (std::size_t i = 0; i < path.edges.size(); ++i) {
      out += render_edge(path.edges[i]) + render_node(path.nodes[i + 1]);
    }
  }
  if (ast.where) out += " WHERE " + render_bool(*ast.where);
  out += " RETURN ";
  for (std::size_t i = 0; i < ast.returns.size(); ++i) {
    if (i) out += ", ";
    out += render_return_expr(ast.returns[i]);
    if (ast.returns[i].explicit_alias) out += " AS " + render_name(ast.returns[i].alias);
  }
  if (ast.order_by) {
    out += " ORDER BY " + render_operand(ast.order_by->operand);
    if (ast.order_by->descending) out += " DESC";
  }
  if (ast.limit) out += " LIMIT " + std::to_string(*ast.limit);
  return out;
}

// --- execution ---------------------------------------------------------------

namespace {

struct BoundRef {
  bool is_edge = false;
  std::size_t index = 0;
  bool operator==(const BoundRef&) const = default;
};

using Binding = std::map<std::string, BoundRef>;

Value property_value_to_value(const PropertyValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return Value(*s);
  if (const auto* d = std::get_if<double>(&v)) return Value(*d);
  return Value(std::get<bool>(v));
}

bool literal_matches(const PropertyMap& props, const std::vector<PropertyLiteral>& wanted) {
  for (const auto& w : wanted) {
    auto it = props.find(w.key);
    if (it == props.end()) return false;
    if (property_value_to_value(it->second) != w.value) return false;
  }
  return true;
}

class Executor {
 public:
  Executor(const GraphStore& store, const QueryAst& ast) : store_(store), ast_(ast) {
    for (std::size_t i = 0; i < store.entities().size(); ++i) entity_index_[store.entities()[i].id] = i;
  }

  ResultTable run() {
    enumerate_pattern(0, {}, {});
    return project();
  }

 private:
  // --- pattern matching ---

  void enumerate_pattern(std::size_t path_idx, Binding binding, std::set<std::size_t> used_edges) {
    if (path_idx == ast_.patterns.size()) {
      bindings_.push_back(std::move(binding));
      return;
    }
    const PatternPath& path = ast_.patterns[path_idx];
    const NodePattern& first = path.nodes[0];
    auto try_start = [&](std::size_t entity_idx) {
      if (!node_matches(first, entity_idx)) return;
      Binding b = binding;
      if (!bind_node(b, first.var, entity_idx)) return;
      walk_path(path_idx, path, 1, entity_idx, std::move(b), used_edges);
    };
    if (!first.var.empty() && binding.count(first.var)) {
      BoundRef ref = binding.at(first.var);
      if (!ref.is_edge) try_start(ref.index);
      return;
    }
    for (std::size_t i = 0; i < store_.entities().size(); ++i) try_start(i);
  }

  void walk_path(std::size_t path_idx, const PatternPath& path, std::size_t next_node, std::size_t cur_entity,
                 Binding binding, std::set<std::size_t> used_edges) {
    if (next_node == path.nodes.size()) {
      enumerate_pattern(path_idx + 1, std::move(binding), std::move(used_edges));
      return;
    }
    const EdgePattern& ep = path.edges[next_node - 1];
    const NodePattern& np = path.nodes[next_node];
    const std::string& cur_id = store_.entities()[cur_entity].id;

    auto try_edge = [&](std::size_t edge_idx, bool traverse_forward) {
      const Edge& e = store_.edge(edge_idx);
      if (!ep.reltype.empty() && e.triplet.relation != ep.reltype) return;
      if (!literal_matches(e.properties, ep.properties)) return;
      if (used_edges.count(edge_idx)) return;
      const std::string& other_id = traverse_forward ? e.triplet.tail : e.triplet.head;
      std::size_t other = entity_index_.at(other_id);
      if (!node_matches(np, other)) return;
      Binding b = binding;
      if (!ep.var.empty()) {
        auto it = b.find(ep.var);
        if (it != b.end()) {
          if (!(it->second == BoundRef{true, edge_idx})) return;
        } else {
          b[ep.var] = BoundRef{true, edge_idx};
        }
      }
      if (!bind_node(b, np.var, other)) return;
      std::set<std::size_t> used = used_edges;
      used.insert(edge_idx);
      walk_path(path_idx, path, next_node + 1, other, std::move(b), std::move(used));
    };

    if (ep.direction == EdgeDir::out || ep.direction == EdgeDir::undirected) {
      for (std::size_t idx : store_.out_edges(cur_id)) try_edge(idx, true);
    }
    if (ep.direction == EdgeDir::in || ep.direction == EdgeDir::undirected) {
      for (std::size_t idx : store_.in_edges(cur_id)) {
        const Edge& e = store_.edge(idx);
        // A self-loop already appeared in the out-edge scan for undirected.
        if (ep.direction == EdgeDir::undirected && e.triplet.head == e.triplet.tail) continue;
        try_edge(idx, false);
      }
    }
  }

  bool node_matches(const NodePattern& np, std::size_t entity_idx) const {
    const Entity& e = store_.entities()[entity_idx];
    if (!np.label.empty() && e.type != np.label) return false;
    if (!np.properties.empty()) {
      PropertyMap merged = e.properties;
      merged.emplace("id", e.id);
      merged.emplace("name", e.name);
      merged.emplace("type", e.type);
      if (!literal_matches(merged, np.properties)) return false;
    }
    return true;
  }

  static bool bind_node(Binding& b, const std::string& var, std::size_t entity_idx) {
    if (var.empty()) return true;
    auto it = b.find(var);
    if (it != b.end()) return it->second == BoundRef{false, entity_idx};
    b[var] = BoundRef{false, entity_idx};
    return true;
  }

  // --- evaluation ---

  Value eval_operand(const Operand& op, const Binding& binding) const {
    if (const auto* lit = std::get_if<Value>(&op)) return *lit;
    if (const auto* vr = std::get_if<VariableRef>(&op)) {
      BoundRef ref = binding.at(vr->var);
      if (ref.is_edge) return Value(store_.edge(ref.index).triplet.relation);
      return Value(store_.entities()[ref.index].name);
    }
    const auto& pa = std::get<PropertyAccess>(op);
    BoundRef ref = binding.at(pa.var);
    const PropertyMap* props;
    const Entity* ent = nullptr;
    if (ref.is_edge) {
      props = &store_.edge(ref.index).properties;
    } else {
      ent = &store_.entities()[ref.index];
      props = &ent->properties;
    }
    auto it = props->find(pa.key);
    if (it != props->end()) return property_value_to_value(it->second);
    if (ent) {
      // Virtual properties backed by the entity record itself.
      if (pa.key == "name") return Value(ent->name);
      if (pa.key == "id") return Value(ent->id);
      if (pa.key == "type" && !ent->type.empty()) return Value(ent->type);
    }
    return Value();
  }

  enum class Tri { yes, no, mismatch };

  Tri eval_comparison(const Comparison& cmp, const Binding& binding) const {
    Value l = eval_operand(cmp.lhs, binding);
    Value r = eval_operand(cmp.rhs, binding);
    if (l.is_null() || r.is_null()) return Tri::no;
    bool result;
    if (std::holds_alternative<double>(l.data) && std::holds_alternative<double>(r.data)) {
      double a = std::get<double>(l.data), b = std::get<double>(r.data);
      result = compare(a <=> b, cmp.op);
    } else if (std::holds_alternative<std::string>(l.data) && std::holds_alternative<std::string>(r.data)) {
      result = compare(std::get<std::string>(l.data) <=> std::get<std::string>(r.data), cmp.op);
    } else if (std::holds_alternative<bool>(l.data) && std::holds_alternative<bool>(r.data)) {
      if (cmp.op != CmpOp::eq && cmp.op != CmpOp::ne) return Tri::mismatch;
      result = (std::get<bool>(l.data) == std::get<bool>(r.data)) == (cmp.op == CmpOp::eq);
    } else {
      return Tri::mismatch;
    }
    return result ? Tri::yes : Tri::no;
  }

  template <typename Ordering>
  static bool compare(Ordering ord, CmpOp op) {
    switch (op) {
      case CmpOp::lt:
        return ord < 0;
      case CmpOp::le:
        return ord <= 0;
      case CmpOp::eq:
        return ord == 0;
      case CmpOp::ne:
        return ord != 0;
      case CmpOp::ge:
        return ord >= 0;
      default:
        return ord > 0;
    }
  }

  // Type-mismatched comparisons evaluate as false and flag the row.
  bool eval_bool(const BoolExpr& e, const Binding& binding, bool& mismatch) const {
    switch (e.kind) {
      case BoolExpr::Kind::comparison: {
        Tri t = eval_comparison(*e.comparison, binding);
        if (t == Tri::mismatch) {
          mismatch = true;
          return false;
        }
        return t == Tri::yes;
      }
      case BoolExpr::Kind::logical_not:
        return !eval_bool(*e.lhs, binding, mismatch);
      case BoolExpr::Kind::logical_and:
        return eval_bool(*e.lhs, binding, mismatch) && eval_bool(*e.rhs, binding, mismatch);
      default:
        return eval_bool(*e.lhs, binding, mismatch) || eval_bool(*e.rhs, binding, mismatch);
    }
  }

  // --- projection ---

  struct Accumulator {
    double sum = 0.0;
    std::size_t numeric_count = 0;
    std::size_t count = 0;
    std::optional<Value> min, max;
    Value::List collected;
  };

  ResultTable project() {
    ResultTable table;
    for (const auto& item : ast_.returns) table.columns.push_back(item.alias);

    // WHERE filter.
    std::vector<const Binding*> rows;
    for (const Binding& b : bindings_) {
      if (ast_.where) {
        bool mismatch = false;
        bool keep = eval_bool(*ast_.where, b, mismatch);
        if (mismatch) ++table.type_mismatch_warnings;
        if (!keep) continue;
      }
      rows.push_back(&b);
    }

    bool has_agg = std::any_of(ast_.returns.begin(), ast_.returns.end(),
                               [](const ReturnItem& i) { return i.agg != AggFn::none; });

    std::vector<std::pair<std::vector<Value>, const Binding*>> out_rows;
    if (!has_agg) {
      for (const Binding* b : rows) {
        std::vector<Value> row;
        for (const auto& item : ast_.returns) row.push_back(eval_operand(*item.operand, *b));
        out_rows.push_back({std::move(row), b});
      }
    } else {
      // Implicit grouping by the non-aggregated items, first-occurrence order.
      std::vector<std::size_t> key_items, agg_items;
      for (std::size_t i = 0; i < ast_.returns.size(); ++i) {
        (ast_.returns[i].agg == AggFn::none ? key_items : agg_items).push_back(i);
      }
      std::vector<std::vector<Value>> group_keys;
      std::vector<std::vector<Accumulator>> group_accs;
      std::map<std::string, std::size_t> group_lookup;  // serialized key -> group
      for (const Binding* b : rows) {
        std::vector<Value> key;
        std::string key_repr;
        for (std::size_t i : key_items) {
          Value v = eval_operand(*ast_.returns[i].operand, *b);
          key_repr += render_value(v) + "\x1f";
          key.push_back(std::move(v));
        }
        auto [it, inserted] = group_lookup.emplace(key_repr, group_keys.size());
        if (inserted) {
          group_keys.push_back(std::move(key));
          group_accs.emplace_back(agg_items.size());
        }
        std::vector<Accumulator>& accs = group_accs[it->second];
        for (std::size_t a = 0; a < agg_items.size(); ++a) {
          const ReturnItem& item = ast_.returns[agg_items[a]];
          Accumulator& acc = accs[a];
          if (item.count_star) {
            ++acc.count;
            continue;
          }
          Value v = eval_operand(*item.operand, *b);
          if (v.is_null()) continue;
          ++acc.count;
          if (item.agg == AggFn::avg || item.agg == AggFn::sum) {
            if (const auto* d = std::get_if<double>(&v.data)) {
              acc.sum += *d;
              ++acc.numeric_count;
            } else {
              ++table.type_mismatch_warnings;
            }
          } else if (item.agg == AggFn::min || item.agg == AggFn::max) {
            if (!acc.min || value_less(v, *acc.min)) acc.min = v;
            if (!acc.max || value_less(*acc.max, v)) acc.max = v;
          } else if (item.agg == AggFn::collect) {
            acc.collected.push_back(std::move(v));
          }
        }
      }
      for (std::size_t g = 0; g < group_keys.size(); ++g) {
        std::vector<Value> row(ast_.returns.size());
        for (std::size_t i = 0; i < key_items.size(); ++i) row[key_items[i]] = group_keys[g][i];
        for (std::size_t a = 0; a < agg_items.size(); ++a) {
          const ReturnItem& item = ast_.returns[agg_items[a]];
          const Accumulator& acc = group_accs[g][a];
          Value v;
          switch (item.agg) {
            case AggFn::count:
              v = Value(static_cast<double>(acc.count));
              break;
            case AggFn::sum:
              v = Value(acc.sum);
              break;
            case AggFn::avg:
              v = acc.numeric_count ? Value(acc.sum / static_cast<double>(acc.numeric_count)) : Value();
              break;
            case AggFn::min:
              v = acc.min.value_or(Value());
              break;
            case AggFn::max:
              v = acc.max.value_or(Value());
              break;
            case AggFn::collect:
              v = Value(acc.collected);
              break;
            default:
              break;
          }
          row[agg_items[a]] = std::move(v);
        }
        out_rows.push_back({std::move(row), nullptr});
      }
    }

    // ORDER BY.
    if (ast_.order_by) {
      const Operand& key = ast_.order_by->operand;
      int column = -1;
      std::string key_text = render_operand(key);
      if (const auto* vr = std::get_if<VariableRef>(&key)) {
        for (std::size_t i = 0; i < table.columns.size(); ++i) {
          if (table.columns[i] == vr->var) column = static_cast<int>(i);
        }
      }
      if (column < 0) {
        for (std::size_t i = 0; i < table.columns.size(); ++i) {
          if (table.columns[i] == key_text) column = static_cast<int>(i);
        }
      }
      if (column < 0 && has_agg) {
        throw CypherError(QueryErrorKind::unsupported_feature,
                          "ORDER BY key must be a returned column when aggregating", 0);
      }
      bool desc = ast_.order_by->descending;
      auto sort_key = [&](const std::pair<std::vector<Value>, const Binding*>& row) -> Value {
        if (column >= 0) return row.first[column];
        return eval_operand(key, *row.second);
      };
      std::stable_sort(out_rows.begin(), out_rows.end(), [&](const auto& a, const auto& b) {
        Value va = sort_key(a), vb = sort_key(b);
        if (va == vb) return false;
        // Nulls stay last in both directions.
        if (va.is_null()) return false;
        if (vb.is_null()) return true;
        return desc ? value_less(vb, va) : value_less(va, vb);
      });
    }

    if (ast_.limit && out_rows.size() > static_cast<std::size_t>(*ast_.limit)) {
      out_rows.resize(static_cast<std::size_t>(*ast_.limit));
    }
    for (auto& [row, _] : out_rows) table.rows.push_back(std::move(row));
    return table;
  }

  const GraphStore& store_;
  const QueryAst& ast_;
  std::unordered_map<std::string, std::size_t> entity_index_;
  std::vector<Binding> bindings_;
};

}  // namespace

ResultTable execute_query(const GraphStore& store, const QueryAst& ast) {
  Executor executor(store, ast);
  return executor.run();
}

std::string ResultTable::to_tsv() const {
  std::string out = text::join(columns, "\t") + "\n";
  for (const auto& row : rows) {
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (const Value& v : row) cells.push_back(v.to_string());
    out += text::join(cells, "\t") + "\n";
  }
  return out;
}

std::string QueryOutcome::verbalize() const {
  if (error) return "query error: " + error->message;
  if (table->rows.empty()) return "query returned no results";
  std::string out;
  for (const auto& row : table->rows) {
    std::vector<std::string> cells;
    for (std::size_t i = 0; i < row.size(); ++i) {
      cells.push_back(table->columns[i] + ": " + row[i].to_string());
    }
    out += text::join(cells, " | ") + "\n";
  }
  if (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

QueryOutcome run_query_text(const GraphStore& store, std::string_view query) {
  QueryOutcome outcome;
  try {
    QueryAst ast = parse(query);
    outcome.table = execute_query(store, ast);
  } catch (const CypherError& e) {
    outcome.error = QueryError{e.kind(), e.what(), e.position()};
  }
  return outcome;
}

}  // namespace byokg::cypher
