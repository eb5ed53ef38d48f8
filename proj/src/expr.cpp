#include "kmelia/expr.hpp"

#include <cassert>
#include <sstream>
#include <vector>

namespace kmelia {

std::string_view type_name(Type t) { return t == Type::Int ? "int" : "bool"; }

std::optional<Type> type_from_name(std::string_view name) {
  std::string lower(name);
  for (auto& ch : lower) ch = static_cast<char>(std::tolower(ch));
  if (lower == "int" || lower == "integer") return Type::Int;
  if (lower == "bool" || lower == "boolean") return Type::Bool;
  return std::nullopt;
}

Type type_of(const Value& v) {
  return std::holds_alternative<bool>(v) ? Type::Bool : Type::Int;
}

std::string to_string(const Value& v) {
  if (const bool* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return std::to_string(std::get<std::int64_t>(v));
}

std::string to_string(const PartialValue& v) {
  return v ? to_string(*v) : "?";
}

std::string_view op_symbol(UnaryOp op) {
  return op == UnaryOp::Neg ? "-" : "not";
}

std::string_view op_symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Eq: return "=";
    case BinaryOp::Ne: return "<>";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::And: return "and";
    case BinaryOp::Or: return "or";
  }
  return "?";
}

struct Expr::Node {
  Kind kind;
  Value value;
  std::string name;
  UnaryOp uop = UnaryOp::Neg;
  BinaryOp bop = BinaryOp::Add;
  std::vector<Expr> operands;
};

Expr::Expr() {
  static const auto kTrue =
      std::make_shared<const Node>(Node{Kind::Literal, Value{true}, {}, {}, {}, {}});
  node_ = kTrue;
}

Expr Expr::literal(Value v) {
  return Expr(std::make_shared<const Node>(
      Node{Kind::Literal, v, {}, UnaryOp::Neg, BinaryOp::Add, {}}));
}

Expr Expr::variable(std::string name) {
  return Expr(std::make_shared<const Node>(Node{
      Kind::Variable, Value{false}, std::move(name), UnaryOp::Neg, BinaryOp::Add, {}}));
}

Expr Expr::unary(UnaryOp op, Expr operand) {
  return Expr(std::make_shared<const Node>(
      Node{Kind::Unary, Value{false}, {}, op, BinaryOp::Add, {std::move(operand)}}));
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
  return Expr(std::make_shared<const Node>(Node{Kind::Binary, Value{false}, {},
                                                UnaryOp::Neg, op,
                                                {std::move(lhs), std::move(rhs)}}));
}

Expr::Kind Expr::kind() const { return node_->kind; }
const Value& Expr::value() const { return node_->value; }
const std::string& Expr::name() const { return node_->name; }
UnaryOp Expr::unary_op() const { return node_->uop; }
BinaryOp Expr::binary_op() const { return node_->bop; }
const Expr& Expr::operand() const { return node_->operands.at(0); }
const Expr& Expr::lhs() const { return node_->operands.at(0); }
const Expr& Expr::rhs() const { return node_->operands.at(1); }

bool Expr::is_true_literal() const {
  return kind() == Kind::Literal && value() == Value{true};
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Expr::Kind::Literal:
      return a.value() == b.value();
    case Expr::Kind::Variable:
      return a.name() == b.name();
    case Expr::Kind::Unary:
      return a.unary_op() == b.unary_op() && a.operand() == b.operand();
    case Expr::Kind::Binary:
      return a.binary_op() == b.binary_op() && a.lhs() == b.lhs() &&
             a.rhs() == b.rhs();
  }
  return false;
}

namespace {

std::int64_t wrap(std::uint64_t v) { return static_cast<std::int64_t>(v); }

std::int64_t as_int(const Value& v, const Expr& where) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  throw TypeMismatch(to_string(where));
}

bool as_bool(const Value& v, const Expr& where) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw TypeMismatch(to_string(where));
}

Value apply_binary(const Expr& e, const Value& l, const Value& r) {
  switch (e.binary_op()) {
    case BinaryOp::Add:
      return wrap(static_cast<std::uint64_t>(as_int(l, e)) +
                  static_cast<std::uint64_t>(as_int(r, e)));
    case BinaryOp::Sub:
      return wrap(static_cast<std::uint64_t>(as_int(l, e)) -
                  static_cast<std::uint64_t>(as_int(r, e)));
    case BinaryOp::Mul:
      return wrap(static_cast<std::uint64_t>(as_int(l, e)) *
                  static_cast<std::uint64_t>(as_int(r, e)));
    case BinaryOp::Eq:
    case BinaryOp::Ne: {
      if (type_of(l) != type_of(r)) throw TypeMismatch(to_string(e));
      bool eq = l == r;
      return e.binary_op() == BinaryOp::Eq ? eq : !eq;
    }
    case BinaryOp::Lt: return as_int(l, e) < as_int(r, e);
    case BinaryOp::Le: return as_int(l, e) <= as_int(r, e);
    case BinaryOp::Gt: return as_int(l, e) > as_int(r, e);
    case BinaryOp::Ge: return as_int(l, e) >= as_int(r, e);
    case BinaryOp::And: return as_bool(l, e) && as_bool(r, e);
    case BinaryOp::Or: return as_bool(l, e) || as_bool(r, e);
  }
  throw TypeMismatch(to_string(e));
}

Value apply_unary(const Expr& e, const Value& v) {
  if (e.unary_op() == UnaryOp::Neg) {
    return wrap(0u - static_cast<std::uint64_t>(as_int(v, e)));
  }
  return !as_bool(v, e);
}

PartialValue eval_rec(const Expr& e, const VariableLookup& lookup) {
  switch (e.kind()) {
    case Expr::Kind::Literal:
      return e.value();
    case Expr::Kind::Variable: {
      const PartialValue* v = lookup(e.name());
      if (v == nullptr) throw UnboundVariable(e.name());
      return *v;
    }
    case Expr::Kind::Unary: {
      PartialValue v = eval_rec(e.operand(), lookup);
      if (!v) return std::nullopt;
      return apply_unary(e, *v);
    }
    case Expr::Kind::Binary: {
      PartialValue l = eval_rec(e.lhs(), lookup);
      PartialValue r = eval_rec(e.rhs(), lookup);
      BinaryOp op = e.binary_op();
      if (op == BinaryOp::And || op == BinaryOp::Or) {
        bool absorbing = op == BinaryOp::Or;
        if (l && as_bool(*l, e) == absorbing) return absorbing;
        if (r && as_bool(*r, e) == absorbing) return absorbing;
      }
      if (!l || !r) return std::nullopt;
      return apply_binary(e, *l, *r);
    }
  }
  return std::nullopt;
}

}  // namespace

Value eval_expr(const Expr& e, const Store& store) {
  // Holds the last looked-up value; the lookup result is consumed before the
  // next call.
  PartialValue slot;
  VariableLookup lookup = [&](std::string_view name) -> const PartialValue* {
    auto it = store.find(name);
    if (it == store.end()) return nullptr;
    slot = it->second;
    return &slot;
  };
  PartialValue v = eval_rec(e, lookup);
  assert(v.has_value());
  return *v;
}

PartialValue eval_partial(const Expr& e, const PartialStore& store) {
  VariableLookup lookup = [&](std::string_view name) -> const PartialValue* {
    auto it = store.find(name);
    return it == store.end() ? nullptr : &it->second;
  };
  return eval_rec(e, lookup);
}

PartialValue eval_partial(const Expr& e, const VariableLookup& lookup) {
  return eval_rec(e, lookup);
}

Type check_type(const Expr& e, const TypeEnv& env) {
  switch (e.kind()) {
    case Expr::Kind::Literal:
      return type_of(e.value());
    case Expr::Kind::Variable: {
      auto it = env.find(e.name());
      if (it == env.end()) throw UnboundVariable(e.name());
      return it->second;
    }
    case Expr::Kind::Unary: {
      Type t = check_type(e.operand(), env);
      Type want = e.unary_op() == UnaryOp::Neg ? Type::Int : Type::Bool;
      if (t != want) throw TypeMismatch(to_string(e));
      return want;
    }
    case Expr::Kind::Binary: {
      Type l = check_type(e.lhs(), env);
      Type r = check_type(e.rhs(), env);
      switch (e.binary_op()) {
        case BinaryOp::Add:
        case BinaryOp::Sub:
        case BinaryOp::Mul:
          if (l != Type::Int || r != Type::Int) throw TypeMismatch(to_string(e));
          return Type::Int;
        case BinaryOp::Eq:
        case BinaryOp::Ne:
          if (l != r) throw TypeMismatch(to_string(e));
          return Type::Bool;
        case BinaryOp::Lt:
        case BinaryOp::Le:
        case BinaryOp::Gt:
        case BinaryOp::Ge:
          if (l != Type::Int || r != Type::Int) throw TypeMismatch(to_string(e));
          return Type::Bool;
        case BinaryOp::And:
        case BinaryOp::Or:
          if (l != Type::Bool || r != Type::Bool) throw TypeMismatch(to_string(e));
          return Type::Bool;
      }
    }
  }
  throw TypeMismatch(to_string(e));
}

namespace {

void collect(const Expr& e, std::set<std::string>& out) {
  switch (e.kind()) {
    case Expr::Kind::Literal:
      return;
    case Expr::Kind::Variable:
      out.insert(e.name());
      return;
    case Expr::Kind::Unary:
      collect(e.operand(), out);
      return;
    case Expr::Kind::Binary:
      collect(e.lhs(), out);
      collect(e.rhs(), out);
      return;
  }
}

// Best-effort: the type a sub-expression would need for `e` to typecheck.
std::optional<Type> natural_type(const Expr& e, const TypeEnv& env) {
  switch (e.kind()) {
    case Expr::Kind::Literal:
      return type_of(e.value());
    case Expr::Kind::Variable: {
      auto it = env.find(e.name());
      if (it == env.end()) return std::nullopt;
      return it->second;
    }
    case Expr::Kind::Unary:
      return e.unary_op() == UnaryOp::Neg ? Type::Int : Type::Bool;
    case Expr::Kind::Binary:
      switch (e.binary_op()) {
        case BinaryOp::Add:
        case BinaryOp::Sub:
        case BinaryOp::Mul:
          return Type::Int;
        default:
          return Type::Bool;
      }
  }
  return std::nullopt;
}

void infer(const Expr& e, Type expected, TypeEnv& env) {
  switch (e.kind()) {
    case Expr::Kind::Literal:
      return;
    case Expr::Kind::Variable:
      env.emplace(e.name(), expected);
      return;
    case Expr::Kind::Unary:
      infer(e.operand(), e.unary_op() == UnaryOp::Neg ? Type::Int : Type::Bool,
            env);
      return;
    case Expr::Kind::Binary:
      switch (e.binary_op()) {
        case BinaryOp::And:
        case BinaryOp::Or:
          infer(e.lhs(), Type::Bool, env);
          infer(e.rhs(), Type::Bool, env);
          return;
        case BinaryOp::Eq:
        case BinaryOp::Ne: {
          auto t = natural_type(e.lhs(), env);
          if (!t) t = natural_type(e.rhs(), env);
          Type side = t.value_or(Type::Int);
          infer(e.lhs(), side, env);
          infer(e.rhs(), side, env);
          return;
        }
        default:
          infer(e.lhs(), Type::Int, env);
          infer(e.rhs(), Type::Int, env);
          return;
      }
  }
}

enum Prec { kOr = 1, kAnd = 2, kNot = 3, kCmp = 4, kAdd = 5, kMul = 6, kNeg = 7, kAtom = 8 };

int precedence(BinaryOp op) {
  switch (op) {
    case BinaryOp::Or: return kOr;
    case BinaryOp::And: return kAnd;
    case BinaryOp::Add:
    case BinaryOp::Sub: return kAdd;
    case BinaryOp::Mul: return kMul;
    default: return kCmp;
  }
}

int precedence(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Literal:
    case Expr::Kind::Variable:
      return kAtom;
    case Expr::Kind::Unary:
      return e.unary_op() == UnaryOp::Neg ? kNeg : kNot;
    case Expr::Kind::Binary:
      return precedence(e.binary_op());
  }
  return kAtom;
}

void render(const Expr& e, int min_prec, std::ostringstream& os);

void render_wrapped(const Expr& e, int min_prec, std::ostringstream& os) {
  if (precedence(e) < min_prec) {
    os << '(';
    render(e, 0, os);
    os << ')';
  } else {
    render(e, min_prec, os);
  }
}

bool is_negative_literal(const Expr& e) {
  if (e.kind() != Expr::Kind::Literal) return false;
  const auto* i = std::get_if<std::int64_t>(&e.value());
  return i != nullptr && *i < 0;
}

void render(const Expr& e, int min_prec, std::ostringstream& os) {
  switch (e.kind()) {
    case Expr::Kind::Literal:
      os << to_string(e.value());
      return;
    case Expr::Kind::Variable:
      os << e.name();
      return;
    case Expr::Kind::Unary:
      if (e.unary_op() == UnaryOp::Not) {
        os << "not ";
        render_wrapped(e.operand(), kNot, os);
        return;
      } else {
        const Expr& x = e.operand();
        // `-3` would re-parse as a literal and `--` opens a comment.
        bool force = (x.kind() == Expr::Kind::Literal &&
                      std::holds_alternative<std::int64_t>(x.value())) ||
                     (x.kind() == Expr::Kind::Unary &&
                      x.unary_op() == UnaryOp::Neg) ||
                     is_negative_literal(x);
        os << '-';
        if (force || precedence(x) < kAtom) {
          os << '(';
          render(x, 0, os);
          os << ')';
        } else {
          render(x, kAtom, os);
        }
        return;
      }
    case Expr::Kind::Binary: {
      int p = precedence(e.binary_op());
      bool cmp = p == kCmp;
      render_wrapped(e.lhs(), cmp ? p + 1 : p, os);
      os << ' ' << op_symbol(e.binary_op()) << ' ';
      render_wrapped(e.rhs(), p + 1, os);
      return;
    }
  }
  (void)min_prec;
}

}  // namespace

std::set<std::string> free_variables(const Expr& e) {
  std::set<std::string> out;
  collect(e, out);
  return out;
}

Expr rename_variables(const Expr& e,
                      const std::function<std::string(const std::string&)>& f) {
  switch (e.kind()) {
    case Expr::Kind::Literal:
      return e;
    case Expr::Kind::Variable:
      return Expr::variable(f(e.name()));
    case Expr::Kind::Unary:
      return Expr::unary(e.unary_op(), rename_variables(e.operand(), f));
    case Expr::Kind::Binary:
      return Expr::binary(e.binary_op(), rename_variables(e.lhs(), f),
                          rename_variables(e.rhs(), f));
  }
  return e;
}

TypeEnv infer_variable_types(const Expr& e, const TypeEnv& env, Type expected) {
  TypeEnv out = env;
  infer(e, expected, out);
  return out;
}

std::string to_string(const Expr& e) {
  std::ostringstream os;
  render(e, 0, os);
  return os.str();
}

}  // namespace kmelia
