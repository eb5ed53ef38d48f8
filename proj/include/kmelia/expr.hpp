#ifndef KMELIA_EXPR_HPP_
#define KMELIA_EXPR_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace kmelia {

enum class Type { Int, Bool };

std::string_view type_name(Type t);
std::optional<Type> type_from_name(std::string_view name);

using Value = std::variant<std::int64_t, bool>;

Type type_of(const Value& v);
std::string to_string(const Value& v);

// A partial value is unknown (nullopt) when the analysis cannot track it.
using PartialValue = std::optional<Value>;

std::string to_string(const PartialValue& v);

using Store = std::map<std::string, Value, std::less<>>;
using PartialStore = std::map<std::string, PartialValue, std::less<>>;
using TypeEnv = std::map<std::string, Type, std::less<>>;

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnboundVariable : EvalError {
  explicit UnboundVariable(std::string var)
      : EvalError("unbound variable '" + var + "'"), name(std::move(var)) {}
  std::string name;
};

struct TypeMismatch : EvalError {
  explicit TypeMismatch(std::string where)
      : EvalError("type mismatch in '" + where + "'"),
        location(std::move(where)) {}
  std::string location;
};

enum class UnaryOp { Neg, Not };
enum class BinaryOp { Add, Sub, Mul, Eq, Ne, Lt, Le, Gt, Ge, And, Or };

std::string_view op_symbol(UnaryOp op);
std::string_view op_symbol(BinaryOp op);

// Immutable expression tree over integers and booleans. Copies share nodes.
// A default-constructed Expr is the literal `true`.
class Expr {
 public:
  enum class Kind { Literal, Variable, Unary, Binary };

  Expr();

  static Expr literal(Value v);
  static Expr integer(std::int64_t v) { return literal(Value{v}); }
  static Expr boolean(bool v) { return literal(Value{v}); }
  static Expr variable(std::string name);
  static Expr unary(UnaryOp op, Expr operand);
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs);

  Kind kind() const;
  const Value& value() const;
  const std::string& name() const;
  UnaryOp unary_op() const;
  BinaryOp binary_op() const;
  const Expr& operand() const;
  const Expr& lhs() const;
  const Expr& rhs() const;

  bool is_true_literal() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

using Predicate = Expr;

Value eval_expr(const Expr& e, const Store& store);

// Three-valued evaluation: unknown operands propagate, except that
// `false and _` is false and `true or _` is true.
PartialValue eval_partial(const Expr& e, const PartialStore& store);

// Variable lookup through a callback; nullptr means unbound.
using VariableLookup = std::function<const PartialValue*(std::string_view)>;
PartialValue eval_partial(const Expr& e, const VariableLookup& lookup);

Type check_type(const Expr& e, const TypeEnv& env);

std::set<std::string> free_variables(const Expr& e);

Expr rename_variables(const Expr& e,
                      const std::function<std::string(const std::string&)>& f);

// Infers a type for every free variable of `e` not already in `env`: bool
// when it appears as an operand of and/or/not or as a whole predicate,
// int otherwise.
TypeEnv infer_variable_types(const Expr& e, const TypeEnv& env,
                             Type expected = Type::Bool);

// Canonical text; re-parses to a structurally equal tree.
std::string to_string(const Expr& e);

}  // namespace kmelia

#endif  // KMELIA_EXPR_HPP_
