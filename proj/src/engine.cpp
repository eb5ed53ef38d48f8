#include "kmelia/engine.hpp"

#include <functional>
#include <sstream>

#include "kmelia/parser.hpp"

namespace kmelia {

std::size_t ProductStateHash::operator()(const ProductState& s) const {
  std::size_t h = 0x9e3779b97f4a7c15ull;
  auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2); };
  for (const auto& slot : s.slots) {
    mix(slot.active | (slot.fresh << 1));
    if (!slot.active) continue;
    mix(static_cast<std::size_t>(slot.node));
    mix(static_cast<std::size_t>(slot.caller + 8));
    for (const auto& v : slot.store) {
      if (!v) {
        mix(0x5bd1e995);
      } else if (const bool* b = std::get_if<bool>(&*v)) {
        mix(*b ? 3 : 5);
      } else {
        mix(std::hash<std::int64_t>{}(std::get<std::int64_t>(*v)));
      }
    }
  }
  return h;
}

std::string_view move_kind_name(MoveKind k) {
  switch (k) {
    case MoveKind::Internal: return "internal";
    case MoveKind::Message: return "message";
    case MoveKind::Call: return "call";
    case MoveKind::Result: return "result";
    case MoveKind::Environment: return "env";
  }
  return "?";
}

int SlotInfo::var_index(std::string_view name) const {
  auto it = var_ids.find(name);
  return it == var_ids.end() ? -1 : it->second;
}

namespace {

VariableLookup lookup_in(const SlotInfo& info, const std::vector<PartialValue>& store) {
  return [&info, &store](std::string_view name) -> const PartialValue* {
    int idx = info.var_index(name);
    if (idx < 0 || static_cast<std::size_t>(idx) >= store.size()) return nullptr;
    return &store[idx];
  };
}

PartialValue default_value(Type t) {
  return t == Type::Int ? Value{std::int64_t{0}} : Value{false};
}

void run_assignments(const SlotInfo& info, std::vector<PartialValue>& store,
                     const std::vector<Assignment>& assignments) {
  for (const auto& a : assignments) {
    int idx = info.var_index(a.target);
    if (idx < 0) throw UnboundVariable(a.target);
    PartialValue v = eval_partial(a.value, lookup_in(info, store));
    store[idx] = v;
  }
}

std::vector<PartialValue> eval_args(const SlotInfo& info, const std::vector<PartialValue>& store,
                                    const Communication& comm) {
  std::vector<PartialValue> out;
  for (const auto& e : comm.args) out.push_back(eval_partial(e, lookup_in(info, store)));
  return out;
}

void bind_values(const SlotInfo& info, std::vector<PartialValue>& store,
          const std::vector<std::string>& binders, const std::vector<PartialValue>& values) {
  for (std::size_t k = 0; k < binders.size(); ++k) {
    int idx = info.var_index(binders[k]);
    if (idx < 0) throw UnboundVariable(binders[k]);
    store[idx] = k < values.size() ? values[k] : PartialValue{};
  }
}

// Known false guards disable a segment; unknown ones leave it enabled.
bool guard_allows(const Segment& seg, const SlotInfo& info,
                  const std::vector<PartialValue>& store, bool& unknown) {
  if (!seg.guard) return true;
  PartialValue v = eval_partial(*seg.guard, lookup_in(info, store));
  if (!v) {
    unknown = true;
    return true;
  }
  const bool* b = std::get_if<bool>(&*v);
  if (!b) throw TypeMismatch(to_string(*seg.guard));
  return *b;
}

}  // namespace

Engine::Engine(const Assembly& assembly, const ServiceKey& entry,
               const PartialStore& entry_args, EngineOptions options)
    : assembly_(assembly), options_(std::move(options)) {
  for (const auto& c : assembly_.components()) {
    for (const auto& [name, s] : c.services) {
      if (s.kind != ServiceKind::Provided) continue;
      SlotInfo info;
      info.key = {c.name, name};
      info.spec = flatten_service(c, name, options_.flatten_depth);
      info.unknown_locals = options_.unknown_locals.count(info.key) > 0;
      slots_.push_back(std::move(info));
    }
  }
  for (const auto& l : assembly_.links()) {
    ChannelInfo ch;
    ch.name = l.channel;
    ch.server_slot = slot_index(l.to);
    ch.service_names = {l.from.service, l.to.service};
    ch.client_component = l.from.component;
    ch.required_service = l.from.service;
    channels_.push_back(std::move(ch));
  }
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    ChannelInfo ch;
    ch.name = "SELF";
    ch.server_slot = static_cast<int>(i);
    ch.service_names = {slots_[i].key.service};
    ch.client_component = slots_[i].key.component;
    slots_[i].self_channel = static_cast<int>(channels_.size());
    channels_.push_back(std::move(ch));
  }
  for (auto& slot : slots_) {
    compile_slot(slot, *assembly_.find_component(slot.key.component));
  }

  entry_ = slot_index(entry);
  if (entry_ < 0) {
    throw UnknownEntry("'" + entry.str() + "' is not a provided service of the assembly");
  }

  initial_.slots.resize(slots_.size());
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    initial_.slots[i].node = slots_[i].initial;
  }
  {
    const SlotInfo& info = slots_[entry_];
    std::vector<PartialValue> params;
    for (const auto& p : info.spec.signature.params) {
      auto it = entry_args.find(p.name);
      params.push_back(it == entry_args.end() ? PartialValue{} : it->second);
    }
    SlotState& st = initial_.slots[entry_];
    st.active = true;
    st.caller = kEnvChannel;
    st.store = activation_store(info, params);
  }
  for (const auto& key : options_.preactivated) {
    int idx = slot_index(key);
    if (idx < 0 || idx == entry_) continue;
    SlotState& st = initial_.slots[idx];
    st.active = true;
    st.fresh = true;
    for (std::size_t c = 0; c < channels_.size(); ++c) {
      if (channels_[c].server_slot == idx && channels_[c].name != "SELF") {
        st.caller = static_cast<int>(c);
        break;
      }
    }
    st.store = activation_store(
        slots_[idx],
        std::vector<PartialValue>(slots_[idx].spec.signature.params.size()));
  }
}

int Engine::slot_index(const ServiceKey& key) const {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].key == key) return static_cast<int>(i);
  }
  return -1;
}

ResolvedChannel Engine::resolve(const SlotInfo& slot, const Component& c,
                                const Communication& comm) const {
  ResolvedChannel r;
  switch (comm.channel.kind) {
    case ChannelRef::Kind::Caller:
      r.kind = ResolvedChannel::Kind::Caller;
      r.end = ResolvedChannel::End::Server;
      return r;
    case ChannelRef::Kind::Self: {
      int target = slot_index({c.name, comm.message});
      if (target < 0) {
        r.kind = ResolvedChannel::Kind::Unresolved;
        return r;
      }
      r.kind = ResolvedChannel::Kind::Channel;
      r.channel = slots_[target].self_channel;
      r.end = ResolvedChannel::End::Client;
      return r;
    }
    case ChannelRef::Kind::Named:
      break;
  }
  const std::string& n = comm.channel.name;
  const auto& links = assembly_.links();
  for (std::size_t l = 0; l < links.size(); ++l) {
    const Link& link = links[l];
    bool named = link.channel == n ||
                 (link.from.component == c.name && link.from.service == n);
    if (!named) continue;
    if (link.to == slot.key) {
      r.kind = ResolvedChannel::Kind::Channel;
      r.channel = static_cast<int>(l);
      r.end = ResolvedChannel::End::Server;
      return r;
    }
    if (link.from.component == c.name) {
      r.kind = ResolvedChannel::Kind::Channel;
      r.channel = static_cast<int>(l);
      r.end = ResolvedChannel::End::Client;
      return r;
    }
  }
  r.kind = ResolvedChannel::Kind::Unresolved;
  return r;
}

void Engine::compile_slot(SlotInfo& slot, const Component& c) {
  slot.vars = scoped_variables(slot.spec);
  for (std::size_t i = 0; i < slot.vars.size(); ++i) {
    slot.var_ids.emplace(slot.vars[i].name, static_cast<int>(i));
  }

  const BehaviorELTS& b = slot.spec.behavior;
  std::map<std::string, int> node_of;
  for (const auto& s : b.states) {
    node_of.emplace(s, static_cast<int>(slot.node_names.size()));
    slot.node_names.push_back(s);
    slot.node_final.push_back(b.finals.count(s) > 0);
  }
  auto node = [&](const std::string& s) {
    auto it = node_of.find(s);
    if (it == node_of.end()) {
      throw std::invalid_argument(slot.key.str() + ": undeclared state '" + s + "'");
    }
    return it->second;
  };
  slot.initial = node(b.initial);

  for (std::size_t ti = 0; ti < b.transitions.size(); ++ti) {
    const Transition& t = b.transitions[ti];
    std::vector<std::vector<const Action*>> groups(1);
    bool seen_comm = false;
    for (const auto& a : t.label.actions) {
      bool is_comm = std::holds_alternative<Communication>(a);
      if (is_comm && seen_comm) groups.emplace_back();
      groups.back().push_back(&a);
      seen_comm = seen_comm || is_comm;
    }
    int from = node(t.source);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      Segment seg;
      seg.from = from;
      seg.transition = static_cast<int>(ti);
      seg.index = static_cast<int>(gi);
      if (gi + 1 == groups.size()) {
        seg.to = node(t.target);
      } else {
        seg.to = static_cast<int>(slot.node_names.size());
        slot.node_names.push_back(t.source + "#" + std::to_string(ti) + "." +
                                  std::to_string(gi));
        slot.node_final.push_back(false);
      }
      if (gi == 0) {
        seg.guard = t.label.guard;
        seg.marker = t.label.marker;
      }
      std::string text;
      for (const Action* a : groups[gi]) {
        if (!text.empty()) text += "; ";
        text += render_action(*a);
        if (const auto* as = std::get_if<Assignment>(a)) {
          (seg.comm ? seg.after : seg.before).push_back(*as);
        } else {
          seg.comm = std::get<Communication>(*a);
        }
      }
      if (seg.marker) {
        text = render_label(Label{std::nullopt, {}, seg.marker});
      } else if (text.empty()) {
        text = "tau";
      }
      seg.text = std::move(text);
      if (seg.comm) seg.channel = resolve(slot, c, *seg.comm);
      from = seg.to;
      slot.segments.push_back(std::move(seg));
    }
  }
  slot.outgoing.assign(slot.node_names.size(), {});
  for (std::size_t i = 0; i < slot.segments.size(); ++i) {
    slot.outgoing[slot.segments[i].from].push_back(static_cast<int>(i));
  }
}

std::vector<PartialValue> Engine::activation_store(
    const SlotInfo& info, const std::vector<PartialValue>& params) const {
  std::vector<PartialValue> store(info.vars.size());
  std::size_t p = 0;
  for (std::size_t i = 0; i < info.vars.size(); ++i) {
    const ScopedVar& v = info.vars[i];
    if (v.is_param) {
      store[i] = p < params.size() ? params[p] : PartialValue{};
      ++p;
    } else if (v.init) {
      store[i] = eval_partial(*v.init, lookup_in(info, store));
    } else if (info.unknown_locals) {
      store[i] = std::nullopt;
    } else {
      store[i] = default_value(v.type);
    }
  }
  return store;
}

bool Engine::is_final_node(int slot, int node) const {
  return slots_[slot].node_final[node];
}

bool Engine::is_successful(const ProductState& s) const {
  for (std::size_t i = 0; i < s.slots.size(); ++i) {
    const SlotState& st = s.slots[i];
    if (!st.active) continue;
    if (!slots_[i].node_final[st.node]) return false;
    if (st.caller >= 0 && !st.fresh) return false;
  }
  return true;
}

Expansion Engine::expand(const ProductState& s) const {
  Expansion ex;
  using Kind = ResolvedChannel::Kind;
  using End = ResolvedChannel::End;

  // Channel a slot's segment uses in the current state.
  struct Effective {
    bool env = false;
    bool blocked = false;
    int channel = kNoChannel;
    End end = End::Client;
  };
  auto effective = [&](const SlotState& st, const Segment& seg) {
    Effective e;
    switch (seg.channel.kind) {
      case Kind::None:
        e.blocked = true;
        break;
      case Kind::Caller:
        if (st.caller >= 0) {
          e.channel = st.caller;
          e.end = End::Server;
        } else if (st.caller == kEnvChannel) {
          Direction d = seg.comm->direction;
          e.env = d == Direction::Call || d == Direction::Await || options_.open_environment;
          e.blocked = !e.env;
        } else {
          e.env = options_.open_environment;
          e.blocked = !e.env;
        }
        break;
      case Kind::Unresolved:
        e.env = options_.open_environment;
        e.blocked = !e.env;
        break;
      case Kind::Channel:
        e.channel = seg.channel.channel;
        e.end = seg.channel.end;
        break;
    }
    return e;
  };

  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const SlotState& st = s.slots[i];
    if (!st.active) continue;
    const SlotInfo& info = slots_[i];
    const int actor = static_cast<int>(i);

    for (int seg_id : info.outgoing[st.node]) {
      const Segment& seg = info.segments[seg_id];
      if (!guard_allows(seg, info, st.store, ex.unknown_guard)) continue;

      if (!seg.comm) {
        Successor succ;
        succ.label.kind = MoveKind::Internal;
        succ.label.actor = actor;
        succ.label.actor_segment = seg_id;
        succ.label.message = seg.text;
        succ.next = s;
        SlotState& nst = succ.next.slots[i];
        run_assignments(info, nst.store, seg.before);
        nst.node = seg.to;
        ex.successors.push_back(std::move(succ));
        continue;
      }

      const Communication& comm = *seg.comm;
      Effective eff = effective(st, seg);
      if (eff.blocked) continue;

      if (eff.env) {
        Successor succ;
        succ.label.kind = MoveKind::Environment;
        succ.label.channel = kEnvChannel;
        succ.label.channel_name = comm.channel.text();
        succ.label.direction = comm.direction;
        succ.label.message = comm.message;
        succ.label.actor = actor;
        succ.label.actor_segment = seg_id;
        succ.next = s;
        SlotState& nst = succ.next.slots[i];
        run_assignments(info, nst.store, seg.before);
        if (is_output(comm.direction)) {
          succ.effects.args = eval_args(info, nst.store, comm);
        } else {
          std::vector<PartialValue> values;
          bool start = seg.channel.kind == Kind::Caller && st.caller == kEnvChannel &&
                       comm.direction == Direction::Await;
          if (start) {
            for (std::size_t k = 0; k < info.vars.size(); ++k) {
              if (info.vars[k].is_param) values.push_back(nst.store[k]);
            }
          }
          bind_values(info, nst.store, comm.binders, values);
          succ.effects.args = values;
          succ.effects.args.resize(comm.binders.size());
        }
        run_assignments(info, nst.store, seg.after);
        nst.node = seg.to;
        ex.successors.push_back(std::move(succ));
        continue;
      }

      const ChannelInfo& chan = channels_[eff.channel];
      auto base_label = [&](MoveKind kind) {
        SyncLabel l;
        l.kind = kind;
        l.channel = eff.channel;
        l.channel_name = chan.name;
        l.direction = comm.direction;
        l.message = comm.message;
        l.actor = actor;
        l.actor_segment = seg_id;
        return l;
      };

      if (comm.direction == Direction::Send) {
        for (std::size_t j = 0; j < slots_.size(); ++j) {
          if (j == i || !s.slots[j].active) continue;
          const SlotState& pst = s.slots[j];
          const SlotInfo& pinfo = slots_[j];
          for (int pseg_id : pinfo.outgoing[pst.node]) {
            const Segment& pseg = pinfo.segments[pseg_id];
            if (!pseg.comm || pseg.comm->direction != Direction::Receive) continue;
            Effective peff = effective(pst, pseg);
            if (peff.blocked || peff.env || peff.channel != eff.channel ||
                peff.end == eff.end) {
              continue;
            }
            if (pseg.comm->message != comm.message ||
                pseg.comm->binders.size() != comm.args.size()) {
              continue;
            }
            if (!guard_allows(pseg, pinfo, pst.store, ex.unknown_guard)) continue;
            Successor succ;
            succ.label = base_label(MoveKind::Message);
            succ.label.partner = static_cast<int>(j);
            succ.label.partner_segment = pseg_id;
            succ.next = s;
            SlotState& a = succ.next.slots[i];
            run_assignments(info, a.store, seg.before);
            succ.effects.args = eval_args(info, a.store, comm);
            run_assignments(info, a.store, seg.after);
            a.node = seg.to;
            SlotState& p = succ.next.slots[j];
            run_assignments(pinfo, p.store, pseg.before);
            bind_values(pinfo, p.store, pseg.comm->binders, succ.effects.args);
            run_assignments(pinfo, p.store, pseg.after);
            p.node = pseg.to;
            ex.successors.push_back(std::move(succ));
          }
        }
        continue;
      }

      if (comm.direction == Direction::Call && eff.end == End::Client) {
        if (!chan.service_names.count(comm.message)) continue;
        const int k = chan.server_slot;
        if (k < 0) continue;
        const SlotState& cst = s.slots[k];
        const SlotInfo& cinfo = slots_[k];
        if (cst.active && !(cst.fresh && cst.node == cinfo.initial)) {
          ex.reentrant_attempt = true;
          continue;
        }
        std::vector<PartialValue> caller_store = st.store;
        run_assignments(info, caller_store, seg.before);
        std::vector<PartialValue> args = eval_args(info, caller_store, comm);
        std::vector<PartialValue> callee_store = activation_store(cinfo, args);
        for (int pseg_id : cinfo.outgoing[cinfo.initial]) {
          const Segment& pseg = cinfo.segments[pseg_id];
          if (!pseg.comm || pseg.comm->direction != Direction::Await) continue;
          bool on_channel =
              pseg.channel.kind == Kind::Caller ||
              (pseg.channel.kind == Kind::Channel && pseg.channel.channel == eff.channel &&
               pseg.channel.end == End::Server);
          if (!on_channel || !chan.service_names.count(pseg.comm->message) ||
              pseg.comm->binders.size() != args.size()) {
            continue;
          }
          if (!guard_allows(pseg, cinfo, callee_store, ex.unknown_guard)) continue;
          Successor succ;
          succ.label = base_label(MoveKind::Call);
          succ.label.partner = k;
          succ.label.partner_segment = pseg_id;
          succ.effects.args = args;
          succ.next = s;
          SlotState& a = succ.next.slots[i];
          a.store = caller_store;
          run_assignments(info, a.store, seg.after);
          a.node = seg.to;
          SlotState& p = succ.next.slots[k];
          p.active = true;
          p.fresh = false;
          p.caller = eff.channel;
          p.store = callee_store;
          run_assignments(cinfo, p.store, pseg.before);
          bind_values(cinfo, p.store, pseg.comm->binders, args);
          run_assignments(cinfo, p.store, pseg.after);
          p.node = pseg.to;
          ex.successors.push_back(std::move(succ));
        }
        continue;
      }

      if (comm.direction == Direction::Call && eff.end == End::Server) {
        if (!chan.service_names.count(comm.message)) continue;
        for (std::size_t j = 0; j < slots_.size(); ++j) {
          if (j == i || !s.slots[j].active) continue;
          const SlotState& pst = s.slots[j];
          const SlotInfo& pinfo = slots_[j];
          for (int pseg_id : pinfo.outgoing[pst.node]) {
            const Segment& pseg = pinfo.segments[pseg_id];
            if (!pseg.comm || pseg.comm->direction != Direction::Await) continue;
            Effective peff = effective(pst, pseg);
            if (peff.blocked || peff.env || peff.channel != eff.channel ||
                peff.end != End::Client) {
              continue;
            }
            if (!chan.service_names.count(pseg.comm->message) ||
                pseg.comm->binders.size() != comm.args.size()) {
              continue;
            }
            if (!guard_allows(pseg, pinfo, pst.store, ex.unknown_guard)) continue;
            Successor succ;
            succ.label = base_label(MoveKind::Result);
            succ.label.partner = static_cast<int>(j);
            succ.label.partner_segment = pseg_id;
            succ.next = s;
            SlotState& a = succ.next.slots[i];
            run_assignments(info, a.store, seg.before);
            succ.effects.args = eval_args(info, a.store, comm);
            run_assignments(info, a.store, seg.after);
            a.node = seg.to;
            if (info.node_final[seg.to]) {
              succ.effects.finished_slot = actor;
              succ.effects.finished_store = a.store;
              a = SlotState{};
              a.node = info.initial;
            }
            SlotState& p = succ.next.slots[j];
            run_assignments(pinfo, p.store, pseg.before);
            bind_values(pinfo, p.store, pseg.comm->binders, succ.effects.args);
            run_assignments(pinfo, p.store, pseg.after);
            p.node = pseg.to;
            ex.successors.push_back(std::move(succ));
          }
        }
        continue;
      }
      // Receive and Await are taken only as the partner of an output.
    }
  }
  return ex;
}

PartialStore Engine::store_of(const SlotInfo& info, const std::vector<PartialValue>& store) {
  PartialStore out;
  for (std::size_t k = 0; k < info.vars.size() && k < store.size(); ++k) {
    out.emplace(info.vars[k].name, store[k]);
  }
  return out;
}

PartialStore Engine::store_of(const ProductState& s, int slot) const {
  return store_of(slots_[slot], s.slots[slot].store);
}

std::string Engine::channel_name(int channel) const {
  if (channel == kEnvChannel) return "env";
  if (channel < 0) return "";
  const ChannelInfo& ch = channels_[channel];
  if (ch.name == "SELF") return "SELF(" + slots_[ch.server_slot].key.str() + ")";
  return ch.name;
}

std::string Engine::describe(const ProductState& s) const {
  std::ostringstream os;
  bool first = true;
  for (std::size_t i = 0; i < s.slots.size(); ++i) {
    const SlotState& st = s.slots[i];
    if (!st.active) continue;
    if (!first) os << " | ";
    first = false;
    const SlotInfo& info = slots_[i];
    os << info.key.str() << '@' << info.node_names[st.node];
    if (st.fresh) os << '*';
    if (st.caller != kNoChannel) os << "<-" << channel_name(st.caller);
    os << '{';
    for (std::size_t k = 0; k < info.vars.size(); ++k) {
      if (k) os << ',';
      os << info.vars[k].name << '=' << to_string(st.store[k]);
    }
    os << '}';
  }
  if (first) os << "(none)";
  return os.str();
}

std::string Engine::describe(const SyncLabel& l) const {
  std::ostringstream os;
  auto seg_text = [&](int slot, int seg) {
    const Segment& sg = slots_[slot].segments[seg];
    return slots_[slot].key.str() + "#t" + std::to_string(sg.transition) + "." +
           std::to_string(sg.index);
  };
  os << move_kind_name(l.kind) << ' ' << seg_text(l.actor, l.actor_segment);
  if (l.partner >= 0) os << " ~ " << seg_text(l.partner, l.partner_segment);
  if (l.kind == MoveKind::Internal) {
    os << ' ' << l.message;
  } else {
    os << ' ' << (l.channel == kEnvChannel ? "env:" + l.channel_name : channel_name(l.channel))
       << direction_symbol(l.direction) << l.message;
  }
  return os.str();
}

}  // namespace kmelia
