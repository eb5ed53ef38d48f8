#ifndef KMELIA_ANALYSIS_HPP_
#define KMELIA_ANALYSIS_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kmelia/engine.hpp"

namespace kmelia {

inline constexpr std::size_t kDefaultBound = 100000;

// Default bound, overridden by the KMELIA_BOUND environment variable.
std::size_t default_bound();

struct ProductTransition {
  std::size_t source;
  SyncLabel label;
  std::size_t target;
};

struct ProductLTS {
  std::shared_ptr<const Engine> engine;
  std::vector<ProductState> states;  // BFS discovery order; states[initial] first
  std::vector<ProductTransition> transitions;
  std::size_t initial = 0;

  std::size_t bound = kDefaultBound;
  bool truncated = false;
  // No guard was ever unknown, so every branch taken was concretely enabled.
  bool exact = true;

  // Per state: every successor is recorded.
  std::vector<bool> expanded;
  // Per state: no successor at all (only meaningful when expanded).
  std::vector<bool> stuck;
  // Per state: index into `transitions` of the BFS tree edge, or npos.
  std::vector<std::size_t> parent;
  // States where a call to an already active service was refused.
  std::vector<std::size_t> reentrant_states;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::optional<std::size_t> find(const ProductState& s) const;
  // Labels along the BFS tree path from the initial state.
  std::vector<SyncLabel> witness_to(std::size_t state) const;
};

struct BoundExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ProductLTS synchronized_product(const Assembly& a, const ServiceKey& entry,
                                std::size_t bound = default_bound(),
                                const PartialStore& entry_args = {},
                                EngineOptions options = {});
ProductLTS synchronized_product(std::shared_ptr<const Engine> engine,
                                std::size_t bound = default_bound());

struct Verdict {
  enum class Kind { Deadlock, Unreachable, ProtocolMismatch, Ok };
  Kind kind = Kind::Ok;
  std::optional<std::vector<SyncLabel>> witness;
  std::optional<std::size_t> state;
  std::string state_text;
  std::size_t states_explored = 0;
  bool truncated = false;
  bool exact = true;
};

std::string_view verdict_kind_name(Verdict::Kind k);

bool is_deadlock_state(const ProductLTS& p, std::size_t state);

// One verdict per deadlocked state, in BFS order, each with a shortest witness.
// On a truncated product the list is sound but may be incomplete.
std::vector<Verdict> detect_deadlocks(const ProductLTS& p);

using StatePredicate = std::function<bool(const ProductLTS&, std::size_t)>;

Verdict check_reachability(const ProductLTS& p, const StatePredicate& goal);

// Goal syntax: `active(C.S)`, `at(C.S, state)`, `terminated`, `deadlock`,
// `C.S.var <op> literal`, combined with and/or/not and parentheses. A
// comparison on an unknown or inactive value is false.
StatePredicate parse_goal(std::string_view text);

struct GoalError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Pairs `provider` with a consumer whose usage behaviour calls it over
// `channel`. Other channels of either side are left open to the environment.
Verdict check_protocol_compatibility(const ServiceSpec& provider,
                                     const BehaviorELTS& consumer_usage,
                                     const std::string& channel,
                                     std::size_t bound = default_bound());

// {kind, witness:[{channel,direction,message}], states_explored, truncated,
// abstraction, state}
std::string verdict_to_json(const Verdict& v, const Engine* engine = nullptr);
std::string verdicts_to_json(const std::vector<Verdict>& vs, const ProductLTS& p);
std::string verdict_to_text(const Verdict& v, const Engine& engine);

}  // namespace kmelia

#endif  // KMELIA_ANALYSIS_HPP_
