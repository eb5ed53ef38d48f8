#ifndef KMELIA_PARSER_HPP_
#define KMELIA_PARSER_HPP_

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kmelia/model.hpp"

namespace kmelia {

// Position of the first syntax error; line and column are 1-based.
struct ParseError : std::runtime_error {
  ParseError(std::size_t line, std::size_t column, std::string expected,
             std::string found);
  std::size_t line;
  std::size_t column;
  std::string expected;
  std::string found;
};

struct SourceFile {
  std::string path;
  std::string text;
  std::vector<Component> components;
};

// Name of the component that collects SERVICE blocks written outside any
// COMPONENT block.
inline constexpr std::string_view kImplicitComponent = "Main";

std::vector<Component> parse_component_file(std::string_view text);
Expr parse_expression(std::string_view text);

// Reads and parses a `.kmelia` file. Throws std::runtime_error when the file
// cannot be read and ParseError on syntax errors.
SourceFile load_source_file(const std::filesystem::path& path);

std::string render_component(const Component& c);
std::string render_components(const std::vector<Component>& cs);
std::string render_action(const Action& a);
std::string render_label(const Label& l);

}  // namespace kmelia

#endif  // KMELIA_PARSER_HPP_
