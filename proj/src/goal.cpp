#include <memory>

#include "kmelia/analysis.hpp"
#include "kmelia/parser.hpp"
#include "lexer.hpp"

namespace kmelia {

namespace {

using detail::Token;
using detail::TokenStream;

struct GoalParser {
  TokenStream& ts;

  StatePredicate parse_or() {
    StatePredicate lhs = parse_and();
    while (ts.accept_keyword("or")) {
      StatePredicate rhs = parse_and();
      lhs = [lhs, rhs](const ProductLTS& p, std::size_t s) { return lhs(p, s) || rhs(p, s); };
    }
    return lhs;
  }

  StatePredicate parse_and() {
    StatePredicate lhs = parse_not();
    while (ts.accept_keyword("and")) {
      StatePredicate rhs = parse_not();
      lhs = [lhs, rhs](const ProductLTS& p, std::size_t s) { return lhs(p, s) && rhs(p, s); };
    }
    return lhs;
  }

  StatePredicate parse_not() {
    if (ts.accept_keyword("not")) {
      StatePredicate inner = parse_not();
      return [inner](const ProductLTS& p, std::size_t s) { return !inner(p, s); };
    }
    return parse_atom();
  }

  std::vector<std::string> qualified() {
    std::vector<std::string> parts{ts.expect_identifier("name")};
    while (ts.accept_symbol(".")) parts.push_back(ts.expect_identifier("name"));
    return parts;
  }

  ServiceKey service_key() {
    auto parts = qualified();
    if (parts.size() != 2) ts.fail("Component.service");
    return {parts[0], parts[1]};
  }

  Value literal() {
    if (ts.accept_keyword("true")) return true;
    if (ts.accept_keyword("false")) return false;
    bool neg = ts.accept_symbol("-");
    if (ts.peek().kind != Token::Kind::Int) ts.fail("literal");
    auto n = static_cast<std::int64_t>(ts.next().number);
    return neg ? -n : n;
  }

  StatePredicate parse_atom() {
    if (ts.accept_symbol("(")) {
      StatePredicate inner = parse_or();
      ts.expect_symbol(")");
      return inner;
    }
    if (ts.accept_keyword("true")) return [](const ProductLTS&, std::size_t) { return true; };
    if (ts.accept_keyword("false")) return [](const ProductLTS&, std::size_t) { return false; };
    if (ts.peek().kind != Token::Kind::Ident) ts.fail("goal");

    const std::string word = ts.peek().text;
    if (detail::iequals(word, "terminated") && !ts.is_symbol(".", 1)) {
      ts.next();
      return [](const ProductLTS& p, std::size_t s) {
        return p.expanded[s] && p.stuck[s] && p.engine->is_successful(p.states[s]);
      };
    }
    if (detail::iequals(word, "deadlock") && !ts.is_symbol(".", 1)) {
      ts.next();
      return [](const ProductLTS& p, std::size_t s) { return is_deadlock_state(p, s); };
    }
    if (detail::iequals(word, "active") && ts.is_symbol("(", 1)) {
      ts.next();
      ts.expect_symbol("(");
      ServiceKey key = service_key();
      ts.expect_symbol(")");
      return [key](const ProductLTS& p, std::size_t s) {
        int slot = p.engine->slot_index(key);
        return slot >= 0 && p.states[s].slots[slot].active;
      };
    }
    if (detail::iequals(word, "at") && ts.is_symbol("(", 1)) {
      ts.next();
      ts.expect_symbol("(");
      ServiceKey key = service_key();
      ts.expect_symbol(",");
      std::string node = ts.expect_identifier("state name");
      ts.expect_symbol(")");
      return [key, node](const ProductLTS& p, std::size_t s) {
        int slot = p.engine->slot_index(key);
        if (slot < 0) return false;
        const SlotState& st = p.states[s].slots[slot];
        return st.active && p.engine->slots()[slot].node_names[st.node] == node;
      };
    }

    auto parts = qualified();
    if (parts.size() != 3) ts.fail("C.S.variable");
    ServiceKey key{parts[0], parts[1]};
    std::string var = parts[2];
    BinaryOp op;
    if (ts.accept_symbol("=")) op = BinaryOp::Eq;
    else if (ts.accept_symbol("<>") || ts.accept_symbol("!=")) op = BinaryOp::Ne;
    else if (ts.accept_symbol("<=")) op = BinaryOp::Le;
    else if (ts.accept_symbol(">=")) op = BinaryOp::Ge;
    else if (ts.accept_symbol("<")) op = BinaryOp::Lt;
    else if (ts.accept_symbol(">")) op = BinaryOp::Gt;
    else ts.fail("comparison operator");
    Expr cmp = Expr::binary(op, Expr::variable("v"), Expr::literal(literal()));
    return [key, var, cmp](const ProductLTS& p, std::size_t s) {
      int slot = p.engine->slot_index(key);
      if (slot < 0) return false;
      const SlotState& st = p.states[s].slots[slot];
      if (!st.active) return false;
      int idx = p.engine->slots()[slot].var_index(var);
      if (idx < 0) return false;
      PartialStore store{{"v", st.store[idx]}};
      PartialValue r;
      try {
        r = eval_partial(cmp, store);
      } catch (const EvalError&) {
        return false;
      }
      return r && std::get<bool>(*r);
    };
  }
};

}  // namespace

StatePredicate parse_goal(std::string_view text) {
  try {
    TokenStream ts(detail::tokenize(text));
    GoalParser gp{ts};
    StatePredicate p = gp.parse_or();
    if (!ts.at_end()) ts.fail("end of goal");
    return p;
  } catch (const ParseError& e) {
    throw GoalError(std::string("goal: ") + e.what());
  }
}

}  // namespace kmelia
