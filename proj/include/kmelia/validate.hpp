#ifndef KMELIA_VALIDATE_HPP_
#define KMELIA_VALIDATE_HPP_

#include <string>
#include <vector>

#include "kmelia/model.hpp"

namespace kmelia {

struct ValidationIssue {
  // Structural issues concern references between parts of the model
  // (names, states, dependency sets). Semantic issues concern variables,
  // types and channel usage.
  enum class Category { Structural, Semantic };
  Category category;
  std::string location;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
  bool structurally_ok() const;
  std::string to_text() const;
};

ValidationReport validate_component(const Component& c);

}  // namespace kmelia

#endif  // KMELIA_VALIDATE_HPP_
