#ifndef KMELIA_TESTS_EXPR_ORACLE_HPP_
#define KMELIA_TESTS_EXPR_ORACLE_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "kmelia/expr.hpp"

namespace oracle {

// Tagged value kept apart from kmelia::Value so a shared bug cannot hide.
struct Val {
  bool is_bool = false;
  std::int64_t i = 0;
  bool b = false;
  bool operator==(const Val&) const = default;
};

using Env = std::map<std::string, Val>;

// Direct recursive evaluation with wrap-around integer arithmetic.
Val evaluate(const kmelia::Expr& e, const Env& env);

// Calls `f` with every environment assigning ints in [lo, hi] or booleans
// according to `types`. Returns false as soon as `f` does.
bool for_all_envs(const kmelia::TypeEnv& types, std::int64_t lo, std::int64_t hi,
                  const std::function<bool(const Env&)>& f);

// premise => conclusion over every environment of `types`.
bool implies(const kmelia::Expr& premise, const kmelia::Expr& conclusion,
             const kmelia::TypeEnv& types, std::int64_t lo = -8, std::int64_t hi = 8);

kmelia::Store to_store(const Env& env);

}  // namespace oracle

#endif  // KMELIA_TESTS_EXPR_ORACLE_HPP_
