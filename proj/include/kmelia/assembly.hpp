#ifndef KMELIA_ASSEMBLY_HPP_
#define KMELIA_ASSEMBLY_HPP_

#include <compare>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kmelia/model.hpp"

namespace kmelia {

// "Component.service".
struct ServiceKey {
  std::string component;
  std::string service;

  std::string str() const { return component + "." + service; }
  static ServiceKey parse(std::string_view text);

  friend auto operator<=>(const ServiceKey&, const ServiceKey&) = default;
};

struct Link {
  std::string channel;
  ServiceKey from;  // required side
  ServiceKey to;    // provided side
  friend bool operator==(const Link&, const Link&) = default;
};

struct AssemblyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnresolvedEndpoint : AssemblyError {
  using AssemblyError::AssemblyError;
};
struct SignatureMismatch : AssemblyError {
  using AssemblyError::AssemblyError;
};
struct DuplicateChannel : AssemblyError {
  using AssemblyError::AssemblyError;
};

class Assembly {
 public:
  Assembly() = default;

  const std::vector<Component>& components() const { return components_; }
  const std::vector<Link>& links() const { return links_; }

  const Component* find_component(std::string_view name) const;
  const ServiceSpec* find_service(const ServiceKey& key) const;

 private:
  friend Assembly link(std::vector<Component> components, std::vector<Link> links);

  std::vector<Component> components_;
  std::vector<Link> links_;
};

// Argument types and result type must agree; names may differ.
bool signatures_compatible(const Signature& required, const Signature& provided);

// Validates endpoints, signatures and channel uniqueness, and checks that
// every named channel used in a behaviour is either a link channel or names
// a requirement of its component. Throws UnresolvedEndpoint,
// SignatureMismatch or DuplicateChannel.
Assembly link(std::vector<Component> components, std::vector<Link> links);

struct DependencyFinding {
  enum class Rule {
    CallerMustProvide,  // r in cal_p but the linked caller does not provide r
    ScopeViolation,     // q in sub_r used outside an interaction with r
  };
  Rule rule;
  std::string location;
  std::string message;
};

struct DependencyReport {
  std::vector<DependencyFinding> findings;
  bool ok() const { return findings.empty(); }
};

DependencyReport check_dependencies(const Assembly& a);

// Assembly file: {"components": ["file.kmelia", ...], "links": [{"channel":
// "cal", "from": "Booking.calendar", "to": "Calendar.calendar"}]}. Component
// paths are relative to the assembly file.
Assembly load_assembly_file(const std::filesystem::path& path);
Assembly assembly_from_json(std::string_view json_text,
                            const std::filesystem::path& base_dir);

}  // namespace kmelia

#endif  // KMELIA_ASSEMBLY_HPP_
