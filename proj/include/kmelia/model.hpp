#ifndef KMELIA_MODEL_HPP_
#define KMELIA_MODEL_HPP_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "kmelia/expr.hpp"

namespace kmelia {

struct Param {
  std::string name;
  Type type = Type::Int;
  friend bool operator==(const Param&, const Param&) = default;
};

struct Signature {
  std::string name;
  std::vector<Param> params;
  std::optional<Type> result;
  friend bool operator==(const Signature&, const Signature&) = default;
};

struct VarDecl {
  std::string name;
  Type type = Type::Int;
  std::optional<Expr> init;
  friend bool operator==(const VarDecl&, const VarDecl&) = default;
};

// sub: provided sub-services in scope; cal: required from the caller;
// req: required from any component; intern: internal services.
struct Dependency {
  std::set<std::string> sub;
  std::set<std::string> cal;
  std::set<std::string> req;
  std::set<std::string> intern;
  friend bool operator==(const Dependency&, const Dependency&) = default;
};

struct ChannelRef {
  enum class Kind { Named, Caller, Self };
  Kind kind = Kind::Named;
  std::string name;  // Named only

  static ChannelRef named(std::string n) { return {Kind::Named, std::move(n)}; }
  static ChannelRef caller() { return {Kind::Caller, {}}; }
  static ChannelRef self() { return {Kind::Self, {}}; }

  std::string text() const;
  friend bool operator==(const ChannelRef&, const ChannelRef&) = default;
};

// ! send, ? receive, !! call or emit result, ?? wait start or wait result.
enum class Direction { Send, Receive, Call, Await };

std::string_view direction_symbol(Direction d);
inline bool is_output(Direction d) {
  return d == Direction::Send || d == Direction::Call;
}

struct Assignment {
  std::string target;
  Expr value;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

// Outputs (! and !!) carry argument expressions; inputs (? and ??) carry
// binder variable names.
struct Communication {
  ChannelRef channel;
  Direction direction = Direction::Send;
  std::string message;
  std::vector<Expr> args;
  std::vector<std::string> binders;

  std::size_t arity() const {
    return is_output(direction) ? args.size() : binders.size();
  }
  friend bool operator==(const Communication&, const Communication&) = default;
};

using Action = std::variant<Assignment, Communication>;

// Internal `enter p` / `exit p` edges produced by flattening.
struct ScopeMarker {
  enum class Kind { Enter, Exit };
  Kind kind = Kind::Enter;
  std::string service;
  friend bool operator==(const ScopeMarker&, const ScopeMarker&) = default;
};

struct Label {
  std::optional<Expr> guard;
  std::vector<Action> actions;
  std::optional<ScopeMarker> marker;

  bool silent() const { return actions.empty() && !marker; }
  friend bool operator==(const Label&, const Label&) = default;
};

struct Transition {
  std::string source;
  Label label;
  std::string target;
  friend bool operator==(const Transition&, const Transition&) = default;
};

struct BehaviorELTS {
  std::set<std::string> states;
  std::vector<Transition> transitions;
  std::map<std::string, std::set<std::string>> annotations;
  std::string initial;
  std::set<std::string> finals;

  // Distinct labels in first-use order.
  std::vector<Label> labels() const;

  // One state that is both initial and final.
  static BehaviorELTS single_state(std::string state = "s0");

  friend bool operator==(const BehaviorELTS&, const BehaviorELTS&) = default;
};

enum class ServiceKind { Provided, Required };

struct ServiceSpec {
  Signature signature;
  Predicate precondition;
  Predicate postcondition;
  std::vector<VarDecl> locals;
  Dependency dependency;
  std::vector<std::string> properties;
  BehaviorELTS behavior = BehaviorELTS::single_state();
  ServiceKind kind = ServiceKind::Provided;

  const std::string& name() const { return signature.name; }
  friend bool operator==(const ServiceSpec&, const ServiceSpec&) = default;
};

// Variables in scope of a service, in store order: params, locals, then the
// implicit `result` when the signature has a result type.
struct ScopedVar {
  std::string name;
  Type type;
  std::optional<Expr> init;
  bool is_param = false;
};

inline constexpr std::string_view kResultVar = "result";

std::vector<ScopedVar> scoped_variables(const ServiceSpec& s);
TypeEnv variable_types(const ServiceSpec& s);

struct Component {
  std::string name;
  std::map<std::string, ServiceSpec> services;
  std::set<std::string> provided;
  std::set<std::string> required;

  const ServiceSpec* find(std::string_view service) const;
  friend bool operator==(const Component&, const Component&) = default;
};

}  // namespace kmelia

#endif  // KMELIA_MODEL_HPP_
