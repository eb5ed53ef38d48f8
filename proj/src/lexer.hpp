#ifndef KMELIA_SRC_LEXER_HPP_
#define KMELIA_SRC_LEXER_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kmelia/expr.hpp"

namespace kmelia::detail {

struct Token {
  enum class Kind { Ident, Int, Symbol, End };
  Kind kind;
  std::string text;
  std::size_t line;
  std::size_t column;
  std::uint64_t number = 0;
};

// Comments run from `--` to end of line; `---` and `--->` are arrows.
std::vector<Token> tokenize(std::string_view text);

bool iequals(std::string_view a, std::string_view b);

class TokenStream {
 public:
  explicit TokenStream(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  const Token& peek(std::size_t ahead = 0) const;
  const Token& next();
  bool at_end() const { return peek().kind == Token::Kind::End; }

  bool is_symbol(std::string_view s, std::size_t ahead = 0) const;
  bool is_keyword(std::string_view kw, std::size_t ahead = 0) const;
  bool accept_symbol(std::string_view s);
  bool accept_keyword(std::string_view kw);

  void expect_symbol(std::string_view s);
  void expect_keyword(std::string_view kw);
  std::string expect_identifier(std::string_view what);

  [[noreturn]] void fail(std::string expected) const;

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

bool is_reserved(std::string_view word);

// Expression grammar shared by the component parser and the goal parser.
Expr parse_expr(TokenStream& ts);

}  // namespace kmelia::detail

#endif  // KMELIA_SRC_LEXER_HPP_
