#include "kmelia/analysis.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace kmelia {

std::size_t default_bound() {
  if (const char* env = std::getenv("KMELIA_BOUND")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return kDefaultBound;
}

std::optional<std::size_t> ProductLTS::find(const ProductState& s) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == s) return i;
  }
  return std::nullopt;
}

std::vector<SyncLabel> ProductLTS::witness_to(std::size_t state) const {
  std::vector<SyncLabel> out;
  while (parent[state] != npos) {
    const ProductTransition& t = transitions[parent[state]];
    out.push_back(t.label);
    state = t.source;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

ProductLTS synchronized_product(std::shared_ptr<const Engine> engine, std::size_t bound) {
  ProductLTS p;
  p.engine = engine;
  p.bound = bound;
  std::unordered_map<ProductState, std::size_t, ProductStateHash> index;

  auto add = [&](const ProductState& s) -> std::optional<std::size_t> {
    auto it = index.find(s);
    if (it != index.end()) return it->second;
    if (p.states.size() >= bound) return std::nullopt;
    std::size_t id = p.states.size();
    p.states.push_back(s);
    p.expanded.push_back(false);
    p.stuck.push_back(false);
    p.parent.push_back(ProductLTS::npos);
    index.emplace(s, id);
    return id;
  };

  p.initial = *add(engine->initial_state());
  for (std::size_t cur = 0; cur < p.states.size(); ++cur) {
    Expansion ex = engine->expand(p.states[cur]);
    if (ex.unknown_guard) p.exact = false;
    if (ex.reentrant_attempt) p.reentrant_states.push_back(cur);
    bool complete = true;
    for (auto& succ : ex.successors) {
      bool fresh = index.find(succ.next) == index.end();
      auto target = add(succ.next);
      if (!target) {
        complete = false;
        p.truncated = true;
        continue;
      }
      p.transitions.push_back({cur, std::move(succ.label), *target});
      if (fresh) p.parent[*target] = p.transitions.size() - 1;
    }
    p.expanded[cur] = complete;
    p.stuck[cur] = ex.successors.empty();
  }
  return p;
}

ProductLTS synchronized_product(const Assembly& a, const ServiceKey& entry, std::size_t bound,
                                const PartialStore& entry_args, EngineOptions options) {
  return synchronized_product(
      std::make_shared<const Engine>(a, entry, entry_args, std::move(options)), bound);
}

std::string_view verdict_kind_name(Verdict::Kind k) {
  switch (k) {
    case Verdict::Kind::Deadlock: return "Deadlock";
    case Verdict::Kind::Unreachable: return "Unreachable";
    case Verdict::Kind::ProtocolMismatch: return "ProtocolMismatch";
    case Verdict::Kind::Ok: return "Ok";
  }
  return "?";
}

bool is_deadlock_state(const ProductLTS& p, std::size_t state) {
  return p.expanded[state] && p.stuck[state] && !p.engine->is_successful(p.states[state]);
}

namespace {

Verdict base_verdict(const ProductLTS& p, Verdict::Kind kind) {
  Verdict v;
  v.kind = kind;
  v.states_explored = p.states.size();
  v.truncated = p.truncated;
  v.exact = p.exact;
  return v;
}

Verdict at_state(const ProductLTS& p, Verdict::Kind kind, std::size_t state) {
  Verdict v = base_verdict(p, kind);
  v.witness = p.witness_to(state);
  v.state = state;
  v.state_text = p.engine->describe(p.states[state]);
  return v;
}

}  // namespace

std::vector<Verdict> detect_deadlocks(const ProductLTS& p) {
  std::vector<Verdict> out;
  for (std::size_t i = 0; i < p.states.size(); ++i) {
    if (is_deadlock_state(p, i)) out.push_back(at_state(p, Verdict::Kind::Deadlock, i));
  }
  return out;
}

Verdict check_reachability(const ProductLTS& p, const StatePredicate& goal) {
  // Discovery order is breadth-first, so the first hit has a shortest witness.
  for (std::size_t i = 0; i < p.states.size(); ++i) {
    if (goal(p, i)) return at_state(p, Verdict::Kind::Ok, i);
  }
  return base_verdict(p, Verdict::Kind::Unreachable);
}

namespace {

void collect_channels(const BehaviorELTS& b, std::set<std::string>& names) {
  for (const auto& t : b.transitions) {
    for (const auto& a : t.label.actions) {
      const auto* c = std::get_if<Communication>(&a);
      if (c && c->channel.kind == ChannelRef::Kind::Named) names.insert(c->channel.name);
    }
  }
}

// Declares every variable the usage behaviour mentions. Binders of the
// provider's messages take the provider's types; the rest are inferred.
std::vector<VarDecl> usage_variables(const BehaviorELTS& b, const ServiceSpec& provider,
                                     const std::string& channel) {
  TypeEnv env;
  for (const auto& t : b.transitions) {
    for (const auto& a : t.label.actions) {
      const auto* c = std::get_if<Communication>(&a);
      if (!c || c->binders.empty()) continue;
      bool on_channel = c->channel.kind == ChannelRef::Kind::Named &&
                        (c->channel.name == channel || c->channel.name == provider.name());
      if (!on_channel || c->message != provider.name()) continue;
      if (c->direction == Direction::Await && provider.signature.result) {
        for (const auto& v : c->binders) env.emplace(v, *provider.signature.result);
      }
    }
  }
  for (int round = 0; round < 3; ++round) {
    for (const auto& t : b.transitions) {
      if (t.label.guard) env = infer_variable_types(*t.label.guard, env, Type::Bool);
      for (const auto& a : t.label.actions) {
        if (const auto* as = std::get_if<Assignment>(&a)) {
          auto it = env.find(as->target);
          Type want = Type::Int;
          if (it != env.end()) {
            want = it->second;
          } else if (as->value.kind() == Expr::Kind::Literal) {
            want = type_of(as->value.value());
          }
          env = infer_variable_types(as->value, env, want);
          env.emplace(as->target, want);
        } else {
          const auto& c = std::get<Communication>(a);
          for (std::size_t k = 0; k < c.args.size(); ++k) {
            Type want = Type::Int;
            if (c.message == provider.name() && k < provider.signature.params.size()) {
              want = provider.signature.params[k].type;
            }
            env = infer_variable_types(c.args[k], env, want);
          }
          for (const auto& v : c.binders) env.emplace(v, Type::Int);
        }
      }
    }
  }
  std::vector<VarDecl> out;
  for (const auto& [name, type] : env) out.push_back({name, type, std::nullopt});
  return out;
}

}  // namespace

Verdict check_protocol_compatibility(const ServiceSpec& provider,
                                     const BehaviorELTS& consumer_usage,
                                     const std::string& channel, std::size_t bound) {
  const std::string pname = provider.name();

  Component prov;
  prov.name = "Provider";
  ServiceSpec pspec = provider;
  pspec.kind = ServiceKind::Provided;
  prov.services.emplace(pname, pspec);
  prov.provided.insert(pname);
  collect_channels(provider.behavior, prov.required);

  Component cons;
  cons.name = "Consumer";
  ServiceSpec usage;
  usage.signature.name = "usage";
  usage.behavior = consumer_usage;
  usage.locals = usage_variables(consumer_usage, provider, channel);
  usage.kind = ServiceKind::Provided;
  cons.services.emplace("usage", usage);
  cons.provided.insert("usage");
  ServiceSpec req;
  req.signature = provider.signature;
  req.kind = ServiceKind::Required;
  req.behavior = BehaviorELTS{};
  cons.services.emplace(pname, req);
  cons.required.insert(pname);
  collect_channels(consumer_usage, cons.required);
  cons.required.erase(channel);

  Assembly a = link({prov, cons}, {{channel, {"Consumer", pname}, {"Provider", pname}}});
  EngineOptions opts;
  opts.open_environment = true;
  opts.preactivated.push_back({"Provider", pname});
  opts.unknown_locals.insert({"Consumer", "usage"});
  auto engine = std::make_shared<const Engine>(a, ServiceKey{"Consumer", "usage"},
                                               PartialStore{}, opts);
  ProductLTS p = synchronized_product(engine, bound);

  // Link channel id is 0: the only link.
  auto waits_on_channel = [&](std::size_t state) {
    const ProductState& s = p.states[state];
    for (std::size_t i = 0; i < s.slots.size(); ++i) {
      const SlotState& st = s.slots[i];
      if (!st.active) continue;
      const SlotInfo& info = engine->slots()[i];
      for (int seg_id : info.outgoing[st.node]) {
        const Segment& seg = info.segments[seg_id];
        if (!seg.comm) continue;
        if (seg.channel.kind == ResolvedChannel::Kind::Channel && seg.channel.channel == 0) {
          return true;
        }
        if (seg.channel.kind == ResolvedChannel::Kind::Caller && st.caller == 0) return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < p.states.size(); ++i) {
    if (is_deadlock_state(p, i) && waits_on_channel(i)) {
      return at_state(p, Verdict::Kind::ProtocolMismatch, i);
    }
  }
  return base_verdict(p, Verdict::Kind::Ok);
}

namespace {

nlohmann::ordered_json label_json(const SyncLabel& l, const Engine* engine) {
  nlohmann::ordered_json j;
  if (l.kind == MoveKind::Internal) {
    j["channel"] = "";
    j["direction"] = "tau";
  } else {
    j["channel"] = engine ? (l.channel == kEnvChannel ? "env:" + l.channel_name
                                                       : engine->channel_name(l.channel))
                          : l.channel_name;
    j["direction"] = std::string(direction_symbol(l.direction));
  }
  j["message"] = l.message;
  j["kind"] = std::string(move_kind_name(l.kind));
  return j;
}

nlohmann::ordered_json verdict_object(const Verdict& v, const Engine* engine) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(verdict_kind_name(v.kind));
  if (v.witness) {
    nlohmann::ordered_json w = nlohmann::ordered_json::array();
    for (const auto& l : *v.witness) w.push_back(label_json(l, engine));
    j["witness"] = w;
  } else {
    j["witness"] = nullptr;
  }
  j["states_explored"] = v.states_explored;
  j["truncated"] = v.truncated;
  j["abstraction"] = v.exact ? "exact" : "may: unknown guards explored both ways";
  if (v.state) j["state"] = v.state_text;
  return j;
}

}  // namespace

std::string verdict_to_json(const Verdict& v, const Engine* engine) {
  return verdict_object(v, engine).dump();
}

std::string verdicts_to_json(const std::vector<Verdict>& vs, const ProductLTS& p) {
  nlohmann::ordered_json j;
  j["states_explored"] = p.states.size();
  j["transitions"] = p.transitions.size();
  j["truncated"] = p.truncated;
  j["abstraction"] = p.exact ? "exact" : "may: unknown guards explored both ways";
  j["reentrant_calls_blocked"] = p.reentrant_states.size();
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& v : vs) arr.push_back(verdict_object(v, p.engine.get()));
  j["verdicts"] = arr;
  return j.dump();
}

std::string verdict_to_text(const Verdict& v, const Engine& engine) {
  std::string out(verdict_kind_name(v.kind));
  if (v.state) out += " at " + v.state_text;
  out += "\n";
  if (v.witness) {
    if (v.witness->empty()) out += "  (empty witness)\n";
    for (std::size_t i = 0; i < v.witness->size(); ++i) {
      out += "  " + std::to_string(i + 1) + ". " + engine.describe((*v.witness)[i]) + "\n";
    }
  }
  out += "  states explored: " + std::to_string(v.states_explored);
  if (v.truncated) out += " (truncated: absence of findings is not guaranteed)";
  if (!v.exact) out += " (guards with unknown values explored both ways)";
  out += "\n";
  return out;
}

}  // namespace kmelia
