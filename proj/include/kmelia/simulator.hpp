#ifndef KMELIA_SIMULATOR_HPP_
#define KMELIA_SIMULATOR_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmelia/engine.hpp"

namespace kmelia {

enum class EventKind { Internal, Send, Receive, Call, Start, Result, ContractViolation, Terminated };

std::string_view event_kind_name(EventKind k);

struct ContractViolation {
  enum class Which { Pre, Post };
  std::string service;  // "C.S"
  Which which = Which::Pre;
  std::string predicate_text;
  PartialStore store;
};

struct ValueChange {
  PartialValue before;
  PartialValue after;
  friend bool operator==(const ValueChange&, const ValueChange&) = default;
};

struct TraceEvent {
  std::size_t step = 0;
  EventKind kind = EventKind::Internal;
  std::string component;
  std::string service;
  std::string channel;
  std::string message;
  std::map<std::string, ValueChange> store_delta;
  std::optional<ContractViolation> violation;
};

enum class Outcome { Success, Deadlock, Violation, StepBudgetExhausted };

std::string_view outcome_name(Outcome o);

struct MissingArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SessionClosed : std::logic_error {
  using std::logic_error::logic_error;
};

struct SimOptions {
  // Stop at the first post-condition violation instead of reporting and going on.
  bool fatal_post = false;
};

// Uniform index in [0, n) from a 64-bit Mersenne Twister by rejection
// sampling, so the schedule is identical on every platform.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

class SimSession {
 public:
  const Engine& engine() const { return *engine_; }
  std::shared_ptr<const Engine> shared_engine() const { return engine_; }
  const ProductState& current() const { return current_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<TraceEvent>& trace() const { return trace_; }
  const std::vector<SyncLabel>& moves() const { return moves_; }
  // Composite states visited, starting with the initial one.
  const std::vector<ProductState>& path() const { return path_; }
  std::size_t step_count() const { return moves_.size(); }

  bool closed() const { return outcome_.has_value(); }
  std::optional<Outcome> outcome() const { return outcome_; }

  // Applies one uniformly chosen enabled move, or terminates the session.
  // Returns the first event appended.
  const TraceEvent& step();

  // Applies the given move, which must be enabled; used to replay witnesses.
  const TraceEvent& apply(const SyncLabel& label);

 private:
  friend SimSession init_session(std::shared_ptr<const Engine> engine, const Store& args,
                                 std::uint64_t seed, SimOptions options);

  SimSession(std::shared_ptr<const Engine> engine, std::uint64_t seed, SimOptions options);

  const TraceEvent& take(const ProductState& before, Successor succ);
  const TraceEvent& terminate(const ProductState& s);
  TraceEvent& emit(EventKind kind, int slot);
  void check(int slot, ContractViolation::Which which, const Expr& predicate,
             const PartialStore& store, const std::string& owner);

  std::shared_ptr<const Engine> engine_;
  ProductState current_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  SimOptions options_;
  std::vector<TraceEvent> trace_;
  std::vector<SyncLabel> moves_;
  std::vector<ProductState> path_;
  std::optional<Outcome> outcome_;
  bool violated_ = false;
  bool halt_ = false;
};

// Throws UnknownEntry, MissingArgument, or std::invalid_argument for an
// argument that is not a parameter or has the wrong type.
SimSession init_session(const Assembly& a, const ServiceKey& entry, const Store& args,
                        std::uint64_t seed, SimOptions options = {});
SimSession init_session(std::shared_ptr<const Engine> engine, const Store& args,
                        std::uint64_t seed, SimOptions options = {});

struct RunResult {
  std::vector<TraceEvent> trace;
  Outcome outcome = Outcome::StepBudgetExhausted;
  ProductState final_state;
  std::vector<SyncLabel> moves;
};

RunResult run(const Assembly& a, const ServiceKey& entry, const Store& args,
              std::uint64_t seed, std::size_t max_steps, SimOptions options = {});
RunResult run(SimSession& session, std::size_t max_steps);

std::string event_to_json(const TraceEvent& e);
// One JSON object per line.
std::string trace_to_jsonl(const std::vector<TraceEvent>& trace);

}  // namespace kmelia

#endif  // KMELIA_SIMULATOR_HPP_
