#include "lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "kmelia/parser.hpp"

namespace kmelia {

ParseError::ParseError(std::size_t line, std::size_t column, std::string expected,
                       std::string found)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) +
                         ": expected " + expected + ", found " + found),
      line(line),
      column(column),
      expected(std::move(expected)),
      found(std::move(found)) {}

namespace detail {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool is_reserved(std::string_view word) {
  static constexpr std::array<std::string_view, 19> kReserved = {
      "component", "service", "end",   "interface", "properties",
      "pre",       "post",    "variables", "behaviour", "behavior",
      "provides",  "requires", "true", "false",     "and",
      "or",        "not",     "caller", "self"};
  return std::any_of(kReserved.begin(), kReserved.end(),
                     [&](std::string_view k) { return iequals(k, word); });
}

std::vector<Token> tokenize(std::string_view text) {
  static constexpr std::array<std::string_view, 9> kLong = {
      "--->", "---", ":=", "<=", ">=", "<>", "!=", "!!", "??"};
  static constexpr std::string_view kSingle = "!?()[]{},;:=<>+-*.";

  std::vector<Token> out;
  std::size_t line = 1, col = 1, i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };

  while (i < text.size()) {
    char ch = text[i];
    if (std::isspace(static_cast<unsigned char>(ch))) {
      advance(1);
      continue;
    }
    std::string_view rest = text.substr(i);
    if (rest.starts_with("--") && !rest.starts_with("---")) {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    Token tok{Token::Kind::Symbol, {}, line, col};
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t n = 0;
      while (n < rest.size() &&
             (std::isalnum(static_cast<unsigned char>(rest[n])) || rest[n] == '_')) {
        ++n;
      }
      tok.kind = Token::Kind::Ident;
      tok.text = std::string(rest.substr(0, n));
      advance(n);
      out.push_back(std::move(tok));
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      std::size_t n = 0;
      std::uint64_t value = 0;
      bool overflow = false;
      while (n < rest.size() && std::isdigit(static_cast<unsigned char>(rest[n]))) {
        std::uint64_t d = static_cast<std::uint64_t>(rest[n] - '0');
        if (value > (UINT64_MAX - d) / 10) overflow = true;
        value = value * 10 + d;
        ++n;
      }
      if (overflow || value > (std::uint64_t{1} << 63)) {
        throw ParseError(line, col, "integer literal", std::string(rest.substr(0, n)));
      }
      tok.kind = Token::Kind::Int;
      tok.text = std::string(rest.substr(0, n));
      tok.number = value;
      advance(n);
      out.push_back(std::move(tok));
      continue;
    }
    bool matched = false;
    for (auto sym : kLong) {
      if (rest.starts_with(sym)) {
        tok.text = std::string(sym);
        advance(sym.size());
        matched = true;
        break;
      }
    }
    if (!matched && kSingle.find(ch) != std::string_view::npos) {
      tok.text = std::string(1, ch);
      advance(1);
      matched = true;
    }
    if (!matched) {
      throw ParseError(line, col, "token", "'" + std::string(1, ch) + "'");
    }
    out.push_back(std::move(tok));
  }
  out.push_back(Token{Token::Kind::End, {}, line, col});
  return out;
}

const Token& TokenStream::peek(std::size_t ahead) const {
  return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
}

const Token& TokenStream::next() {
  const Token& t = tokens_[pos_];
  if (pos_ + 1 < tokens_.size()) ++pos_;
  return t;
}

bool TokenStream::is_symbol(std::string_view s, std::size_t ahead) const {
  const Token& t = peek(ahead);
  return t.kind == Token::Kind::Symbol && t.text == s;
}

bool TokenStream::is_keyword(std::string_view kw, std::size_t ahead) const {
  const Token& t = peek(ahead);
  return t.kind == Token::Kind::Ident && iequals(t.text, kw);
}

bool TokenStream::accept_symbol(std::string_view s) {
  if (!is_symbol(s)) return false;
  next();
  return true;
}

bool TokenStream::accept_keyword(std::string_view kw) {
  if (!is_keyword(kw)) return false;
  next();
  return true;
}

void TokenStream::expect_symbol(std::string_view s) {
  if (!accept_symbol(s)) fail("'" + std::string(s) + "'");
}

void TokenStream::expect_keyword(std::string_view kw) {
  if (!accept_keyword(kw)) {
    std::string upper(kw);
    for (auto& c : upper) c = static_cast<char>(std::toupper(c));
    fail(upper);
  }
}

std::string TokenStream::expect_identifier(std::string_view what) {
  const Token& t = peek();
  if (t.kind != Token::Kind::Ident || is_reserved(t.text)) fail(std::string(what));
  return next().text;
}

void TokenStream::fail(std::string expected) const {
  const Token& t = peek();
  std::string found = t.kind == Token::Kind::End ? "end of input" : "'" + t.text + "'";
  throw ParseError(t.line, t.column, std::move(expected), std::move(found));
}

namespace {

Expr parse_or(TokenStream& ts);

Expr parse_primary(TokenStream& ts) {
  const Token& t = ts.peek();
  if (t.kind == Token::Kind::Int) {
    std::uint64_t v = ts.next().number;
    if (v > static_cast<std::uint64_t>(INT64_MAX)) ts.fail("integer in range");
    return Expr::integer(static_cast<std::int64_t>(v));
  }
  if (ts.accept_keyword("true")) return Expr::boolean(true);
  if (ts.accept_keyword("false")) return Expr::boolean(false);
  if (ts.accept_symbol("(")) {
    Expr e = parse_or(ts);
    ts.expect_symbol(")");
    return e;
  }
  return Expr::variable(ts.expect_identifier("expression"));
}

Expr parse_unary(TokenStream& ts) {
  if (ts.accept_symbol("-")) {
    const Token& t = ts.peek();
    if (t.kind == Token::Kind::Int) {
      std::uint64_t v = ts.next().number;
      if (v > (std::uint64_t{1} << 63)) ts.fail("integer in range");
      return Expr::integer(static_cast<std::int64_t>(0u - v));
    }
    return Expr::unary(UnaryOp::Neg, parse_unary(ts));
  }
  return parse_primary(ts);
}

Expr parse_mul(TokenStream& ts) {
  Expr e = parse_unary(ts);
  while (ts.accept_symbol("*")) e = Expr::binary(BinaryOp::Mul, e, parse_unary(ts));
  return e;
}

Expr parse_add(TokenStream& ts) {
  Expr e = parse_mul(ts);
  for (;;) {
    if (ts.accept_symbol("+")) {
      e = Expr::binary(BinaryOp::Add, e, parse_mul(ts));
    } else if (ts.accept_symbol("-")) {
      e = Expr::binary(BinaryOp::Sub, e, parse_mul(ts));
    } else {
      return e;
    }
  }
}

Expr parse_cmp(TokenStream& ts) {
  Expr e = parse_add(ts);
  static const std::pair<std::string_view, BinaryOp> kOps[] = {
      {"=", BinaryOp::Eq},  {"<>", BinaryOp::Ne}, {"!=", BinaryOp::Ne},
      {"<=", BinaryOp::Le}, {">=", BinaryOp::Ge}, {"<", BinaryOp::Lt},
      {">", BinaryOp::Gt}};
  for (const auto& [sym, op] : kOps) {
    if (ts.accept_symbol(sym)) return Expr::binary(op, e, parse_add(ts));
  }
  return e;
}

Expr parse_not(TokenStream& ts) {
  if (ts.accept_keyword("not")) return Expr::unary(UnaryOp::Not, parse_not(ts));
  return parse_cmp(ts);
}

Expr parse_and(TokenStream& ts) {
  Expr e = parse_not(ts);
  while (ts.accept_keyword("and")) e = Expr::binary(BinaryOp::And, e, parse_not(ts));
  return e;
}

Expr parse_or(TokenStream& ts) {
  Expr e = parse_and(ts);
  while (ts.accept_keyword("or")) e = Expr::binary(BinaryOp::Or, e, parse_and(ts));
  return e;
}

}  // namespace

Expr parse_expr(TokenStream& ts) { return parse_or(ts); }

}  // namespace detail
}  // namespace kmelia
