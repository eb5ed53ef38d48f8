#include "kmelia/simulator.hpp"

#include <limits>

#include <nlohmann/json.hpp>

namespace kmelia {

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Internal: return "Internal";
    case EventKind::Send: return "Send";
    case EventKind::Receive: return "Receive";
    case EventKind::Call: return "Call";
    case EventKind::Start: return "Start";
    case EventKind::Result: return "Result";
    case EventKind::ContractViolation: return "ContractViolation";
    case EventKind::Terminated: return "Terminated";
  }
  return "?";
}

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Deadlock: return "deadlock";
    case Outcome::Violation: return "violation";
    case Outcome::StepBudgetExhausted: return "step_budget_exhausted";
  }
  return "?";
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t range = n;
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

SimSession::SimSession(std::shared_ptr<const Engine> engine, std::uint64_t seed,
                       SimOptions options)
    : engine_(std::move(engine)),
      current_(engine_->initial_state()),
      seed_(seed),
      rng_(seed),
      options_(options) {
  path_.push_back(current_);
}

TraceEvent& SimSession::emit(EventKind kind, int slot) {
  TraceEvent e;
  e.step = trace_.size();
  e.kind = kind;
  if (slot >= 0) {
    const ServiceKey& key = engine_->slots()[slot].key;
    e.component = key.component;
    e.service = key.service;
  }
  trace_.push_back(std::move(e));
  return trace_.back();
}

void SimSession::check(int slot, ContractViolation::Which which, const Expr& predicate,
                       const PartialStore& store, const std::string& owner) {
  PartialValue v = eval_partial(predicate, store);
  if (!v || std::get<bool>(*v)) return;
  TraceEvent& e = emit(EventKind::ContractViolation, slot);
  e.message = which == ContractViolation::Which::Pre ? "pre" : "post";
  e.violation = ContractViolation{owner, which, to_string(predicate), store};
  violated_ = true;
  if (which == ContractViolation::Which::Pre || options_.fatal_post) halt_ = true;
}

namespace {

std::map<std::string, ValueChange> delta(const SlotInfo& info,
                                         const std::vector<PartialValue>& before,
                                         const std::vector<PartialValue>& after) {
  std::map<std::string, ValueChange> out;
  for (std::size_t k = 0; k < info.vars.size(); ++k) {
    PartialValue b = k < before.size() ? before[k] : PartialValue{};
    PartialValue a = k < after.size() ? after[k] : PartialValue{};
    bool had = k < before.size();
    if (!had || b != a) out.emplace(info.vars[k].name, ValueChange{b, a});
  }
  return out;
}

EventKind actor_event(const SyncLabel& l) {
  switch (l.kind) {
    case MoveKind::Internal: return EventKind::Internal;
    case MoveKind::Message: return EventKind::Send;
    case MoveKind::Call: return EventKind::Call;
    case MoveKind::Result: return EventKind::Result;
    case MoveKind::Environment:
      switch (l.direction) {
        case Direction::Send: return EventKind::Send;
        case Direction::Receive: return EventKind::Receive;
        case Direction::Call: return l.channel_name == "CALLER" ? EventKind::Result : EventKind::Call;
        case Direction::Await: return l.channel_name == "CALLER" ? EventKind::Start : EventKind::Receive;
      }
  }
  return EventKind::Internal;
}

// The callee sees a Call as its Start.
EventKind partner_event(const SyncLabel& l) {
  return l.kind == MoveKind::Call ? EventKind::Start : EventKind::Receive;
}

}  // namespace

const TraceEvent& SimSession::take(const ProductState& before, Successor succ) {
  const std::size_t first = trace_.size();
  const SyncLabel& l = succ.label;
  const auto& slots = engine_->slots();
  std::string channel = l.kind == MoveKind::Internal ? ""
                        : l.channel == kEnvChannel  ? "env:" + l.channel_name
                                                    : engine_->channel_name(l.channel);

  {
    const SlotInfo& info = slots[l.actor];
    const auto& after = succ.effects.finished_slot == l.actor
                            ? succ.effects.finished_store
                            : succ.next.slots[l.actor].store;
    TraceEvent& e = emit(actor_event(l), l.actor);
    e.channel = channel;
    e.message = l.message;
    e.store_delta = delta(info, before.slots[l.actor].store, after);
  }
  if (l.partner >= 0) {
    const SlotInfo& info = slots[l.partner];
    const SlotState& was = before.slots[l.partner];
    TraceEvent& e = emit(partner_event(l), l.partner);
    e.channel = channel;
    e.message = l.message;
    e.store_delta = delta(info, was.active ? was.store : std::vector<PartialValue>{},
                          succ.next.slots[l.partner].store);
  }

  current_ = std::move(succ.next);
  moves_.push_back(l);
  path_.push_back(current_);

  if (l.kind == MoveKind::Call) {
    const ChannelInfo& ch = engine_->channels()[l.channel];
    const SlotInfo& callee = slots[l.partner];
    // Required side first: the caller is the one holding the argument values.
    if (!ch.required_service.empty()) {
      const Component* c = engine_->assembly().find_component(ch.client_component);
      const ServiceSpec* req = c ? c->find(ch.required_service) : nullptr;
      if (req) {
        PartialStore store;
        for (std::size_t k = 0; k < req->signature.params.size(); ++k) {
          store.emplace(req->signature.params[k].name,
                        k < succ.effects.args.size() ? succ.effects.args[k] : PartialValue{});
        }
        check(l.actor, ContractViolation::Which::Pre, req->precondition, store,
              ch.client_component + "." + ch.required_service);
      }
    }
    if (!halt_) {
      check(l.partner, ContractViolation::Which::Pre, callee.spec.precondition,
            engine_->store_of(current_, l.partner), callee.key.str());
    }
  }
  if (succ.effects.finished_slot >= 0) {
    const SlotInfo& done = slots[succ.effects.finished_slot];
    check(succ.effects.finished_slot, ContractViolation::Which::Post, done.spec.postcondition,
          Engine::store_of(done, succ.effects.finished_store), done.key.str());
  }
  if (halt_) outcome_ = Outcome::Violation;
  return trace_[first];
}

const TraceEvent& SimSession::terminate(const ProductState& s) {
  const std::size_t first = trace_.size();
  bool success = engine_->is_successful(s);
  if (success) {
    for (std::size_t i = 0; i < s.slots.size(); ++i) {
      if (!s.slots[i].active || halt_) continue;
      const SlotInfo& info = engine_->slots()[i];
      check(static_cast<int>(i), ContractViolation::Which::Post, info.spec.postcondition,
            engine_->store_of(s, static_cast<int>(i)), info.key.str());
    }
  }
  if (halt_) {
    outcome_ = Outcome::Violation;
    return trace_[first];
  }
  TraceEvent& e = emit(EventKind::Terminated, -1);
  e.message = success ? "success" : "deadlock";
  if (!success) {
    outcome_ = Outcome::Deadlock;
  } else {
    outcome_ = violated_ ? Outcome::Violation : Outcome::Success;
  }
  return trace_[first];
}

const TraceEvent& SimSession::step() {
  if (closed()) throw SessionClosed("session already finished");
  Expansion ex = engine_->expand(current_);
  if (ex.successors.empty()) return terminate(current_);
  std::size_t pick = uniform_index(rng_, ex.successors.size());
  ProductState before = current_;
  return take(before, std::move(ex.successors[pick]));
}

const TraceEvent& SimSession::apply(const SyncLabel& label) {
  if (closed()) throw SessionClosed("session already finished");
  Expansion ex = engine_->expand(current_);
  for (auto& succ : ex.successors) {
    if (succ.label == label) {
      ProductState before = current_;
      return take(before, std::move(succ));
    }
  }
  throw std::invalid_argument("move not enabled: " + engine_->describe(label));
}

SimSession init_session(std::shared_ptr<const Engine> engine, const Store& args,
                        std::uint64_t seed, SimOptions options) {
  const SlotInfo& entry = engine->slots()[engine->entry_slot()];
  for (const auto& [name, value] : args) {
    bool found = false;
    for (const auto& p : entry.spec.signature.params) {
      if (p.name != name) continue;
      found = true;
      if (type_of(value) != p.type) {
        throw std::invalid_argument("argument '" + name + "' of " + entry.key.str() +
                                    " must be " + std::string(type_name(p.type)));
      }
    }
    if (!found) {
      throw std::invalid_argument("'" + name + "' is not a parameter of " + entry.key.str());
    }
  }
  for (const auto& p : entry.spec.signature.params) {
    if (!args.count(p.name)) {
      throw MissingArgument("missing argument '" + p.name + "' for " + entry.key.str());
    }
  }
  SimSession s(std::move(engine), seed, options);
  const int slot = s.engine_->entry_slot();
  s.check(slot, ContractViolation::Which::Pre, entry.spec.precondition,
          s.engine_->store_of(s.current_, slot), entry.key.str());
  if (s.halt_) s.outcome_ = Outcome::Violation;
  return s;
}

SimSession init_session(const Assembly& a, const ServiceKey& entry, const Store& args,
                        std::uint64_t seed, SimOptions options) {
  PartialStore partial(args.begin(), args.end());
  auto engine = std::make_shared<const Engine>(a, entry, partial);
  return init_session(std::move(engine), args, seed, options);
}

RunResult run(SimSession& session, std::size_t max_steps) {
  while (!session.closed() && session.step_count() < max_steps) session.step();
  if (!session.closed() && max_steps > 0 && session.step_count() == max_steps) {
    // The budget ran out exactly at a terminal state: still report it.
    if (session.engine().expand(session.current()).successors.empty()) session.step();
  }
  RunResult r;
  r.trace = session.trace();
  r.outcome = session.outcome().value_or(Outcome::StepBudgetExhausted);
  r.final_state = session.current();
  r.moves = session.moves();
  return r;
}

RunResult run(const Assembly& a, const ServiceKey& entry, const Store& args,
              std::uint64_t seed, std::size_t max_steps, SimOptions options) {
  SimSession s = init_session(a, entry, args, seed, options);
  return run(s, max_steps);
}

namespace {

nlohmann::ordered_json value_json(const PartialValue& v) {
  if (!v) return nullptr;
  if (const bool* b = std::get_if<bool>(&*v)) return *b;
  return std::get<std::int64_t>(*v);
}

}  // namespace

std::string event_to_json(const TraceEvent& e) {
  nlohmann::ordered_json j;
  j["step"] = e.step;
  j["kind"] = std::string(event_kind_name(e.kind));
  j["component"] = e.component;
  j["service"] = e.service;
  j["channel"] = e.channel;
  j["message"] = e.message;
  nlohmann::ordered_json d = nlohmann::ordered_json::object();
  for (const auto& [name, change] : e.store_delta) {
    d[name] = {{"before", value_json(change.before)}, {"after", value_json(change.after)}};
  }
  j["store_delta"] = d;
  if (e.violation) {
    nlohmann::ordered_json store = nlohmann::ordered_json::object();
    for (const auto& [name, v] : e.violation->store) store[name] = value_json(v);
    j["violation"] = {
        {"service", e.violation->service},
        {"which", e.violation->which == ContractViolation::Which::Pre ? "pre" : "post"},
        {"predicate", e.violation->predicate_text},
        {"store", store}};
  }
  return j.dump();
}

std::string trace_to_jsonl(const std::vector<TraceEvent>& trace) {
  std::string out;
  for (const auto& e : trace) {
    out += event_to_json(e);
    out += '\n';
  }
  return out;
}

}  // namespace kmelia
