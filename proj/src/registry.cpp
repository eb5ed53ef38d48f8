#include "kmelia/registry.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <mutex>

#include <nlohmann/json.hpp>

#include "kmelia/assembly.hpp"
#include "kmelia/parser.hpp"

namespace kmelia {

const ServiceSpec& ServiceDescriptor::spec() const {
  const ServiceSpec* s = component ? component->find(service) : nullptr;
  if (!s) throw InvalidDescriptor("descriptor '" + id + "' has no service " + service);
  return *s;
}

ServiceDescriptor make_descriptor(std::shared_ptr<const Component> component,
                                  const std::string& service) {
  const ServiceSpec* s = component->find(service);
  if (!s || !component->provided.count(service)) {
    throw InvalidDescriptor(component->name + "." + service + " is not a provided service");
  }
  ServiceDescriptor d;
  d.provider = component->name;
  d.signature = s->signature;
  d.precondition = s->precondition;
  d.postcondition = s->postcondition;
  d.properties = s->properties;
  d.service = service;
  d.component = std::move(component);
  return d;
}

bool Query::valid() const {
  return name_pattern || param_arity || result_type || !required_properties.empty() ||
         entailment;
}

bool entails(const Predicate& premise, const Predicate& conclusion, const TypeEnv& hints,
             std::int64_t lo, std::int64_t hi) {
  TypeEnv env = hints;
  env = infer_variable_types(premise, env, Type::Bool);
  env = infer_variable_types(conclusion, env, Type::Bool);

  std::vector<std::string> names;
  for (const auto& v : free_variables(premise)) names.push_back(v);
  for (const auto& v : free_variables(conclusion)) {
    if (std::find(names.begin(), names.end(), v) == names.end()) names.push_back(v);
  }
  std::vector<Type> types;
  for (const auto& n : names) types.push_back(env.at(n));

  auto first = [&](Type t) { return t == Type::Int ? Value{lo} : Value{false}; };
  Store store;
  for (std::size_t i = 0; i < names.size(); ++i) store[names[i]] = first(types[i]);

  auto holds = [&](const Predicate& p) {
    Value v = eval_expr(p, store);
    const bool* b = std::get_if<bool>(&v);
    if (!b) throw TypeMismatch(to_string(p));
    return *b;
  };

  while (true) {
    if (holds(premise) && !holds(conclusion)) return false;
    // Odometer over the finite domain.
    std::size_t i = 0;
    for (; i < names.size(); ++i) {
      Value& v = store[names[i]];
      if (types[i] == Type::Int) {
        auto& n = std::get<std::int64_t>(v);
        if (n < hi) {
          ++n;
          break;
        }
        n = lo;
      } else {
        auto& b = std::get<bool>(v);
        if (!b) {
          b = true;
          break;
        }
        b = false;
      }
    }
    if (i == names.size()) return true;
  }
}

bool matches(const Query& q, const ServiceDescriptor& d) {
  if (q.name_pattern && fnmatch(q.name_pattern->c_str(), d.signature.name.c_str(), 0) != 0) {
    return false;
  }
  if (q.param_arity && *q.param_arity != d.signature.params.size()) return false;
  if (q.result_type && d.signature.result != q.result_type) return false;
  for (const auto& p : q.required_properties) {
    if (std::find(d.properties.begin(), d.properties.end(), p) == d.properties.end()) {
      return false;
    }
  }
  if (q.entailment) {
    TypeEnv hints;
    for (const auto& p : d.signature.params) hints.emplace(p.name, p.type);
    try {
      if (!entails(*q.entailment, d.precondition, hints)) return false;
    } catch (const EvalError&) {
      return false;
    }
  }
  return true;
}

std::size_t property_overlap(const Query& q, const ServiceDescriptor& d) {
  std::size_t n = 0;
  for (const auto& p : q.required_properties) {
    if (std::find(d.properties.begin(), d.properties.end(), p) != d.properties.end()) ++n;
  }
  return n;
}

std::string Registry::insert(ServiceDescriptor d, std::optional<std::string> id) {
  const ServiceSpec& spec = d.spec();
  if (!d.component->provided.count(d.service) || spec.signature != d.signature ||
      d.provider != d.component->name) {
    throw InvalidDescriptor("descriptor for " + d.provider + "." + d.service +
                            " does not match its component");
  }
  for (const auto& [eid, e] : entries_) {
    if (!e.dead_at && e.descriptor.provider == d.provider &&
        e.descriptor.signature == d.signature) {
      throw DuplicateRegistration(d.provider + "." + d.signature.name +
                                  " is already registered as " + eid);
    }
  }
  if (!id) {
    id = "svc-" + std::to_string(next_id_++);
  } else if (entries_.count(*id)) {
    throw DuplicateRegistration("id '" + *id + "' already in use");
  }
  d.id = *id;
  entries_.emplace(*id, Entry{std::move(d), next_order_++, std::nullopt});
  ++epoch_;
  return *id;
}

std::shared_lock<std::shared_mutex> Registry::read_lock() const {
  { std::lock_guard gate(turnstile_); }
  return std::shared_lock(mutex_);
}

std::unique_lock<std::shared_mutex> Registry::write_lock() {
  std::lock_guard gate(turnstile_);
  return std::unique_lock(mutex_);
}

std::string Registry::register_service(ServiceDescriptor d) {
  auto lock = write_lock();
  return insert(std::move(d), std::nullopt);
}

std::vector<std::pair<const Registry::Entry*, std::size_t>> Registry::matching(
    const Query& q) const {
  if (!q.valid()) throw InvalidQuery("query has no criterion");
  std::vector<std::pair<const Entry*, std::size_t>> hits;
  for (const auto& [id, e] : entries_) {
    if (!e.dead_at && matches(q, e.descriptor)) {
      hits.emplace_back(&e, property_overlap(q, e.descriptor));
    }
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first->order < b.first->order;
  });
  return hits;
}

std::vector<ServiceDescriptor> Registry::discover(const Query& q) const {
  auto lock = read_lock();
  std::vector<ServiceDescriptor> out;
  for (const auto& [e, overlap] : matching(q)) out.push_back(e->descriptor);
  return out;
}

Binding Registry::bind(const std::string& client, const std::string& id) {
  auto lock = write_lock();
  auto it = entries_.find(id);
  if (it == entries_.end() || it->second.dead_at) {
    throw UnknownId("no live service with id '" + id + "'");
  }
  Binding b{client, id, "bind-" + std::to_string(next_channel_++), ++epoch_};
  bindings_.emplace(b.channel, b);
  return b;
}

void Registry::unbind(const Binding& b) {
  auto lock = write_lock();
  auto it = bindings_.find(b.channel);
  if (it == bindings_.end() || it->second != b) {
    throw UnknownId("no binding on channel '" + b.channel + "'");
  }
  bindings_.erase(it);
  ++epoch_;
}

void Registry::unregister(const std::string& id) {
  auto lock = write_lock();
  auto it = entries_.find(id);
  if (it == entries_.end() || it->second.dead_at) {
    throw UnknownId("no live service with id '" + id + "'");
  }
  it->second.dead_at = ++epoch_;
}

RunResult Registry::invoke(const Binding& b, const Store& args, std::uint64_t seed,
                           std::size_t max_steps) const {
  ServiceDescriptor d;
  {
    auto lock = read_lock();
    auto bit = bindings_.find(b.channel);
    if (bit == bindings_.end() || bit->second != b) {
      throw UnknownId("no binding on channel '" + b.channel + "'");
    }
    const Entry& e = entries_.at(b.descriptor_id);
    if (e.dead_at && *e.dead_at > b.epoch) {
      throw StaleBinding("service '" + b.descriptor_id + "' was unregistered at epoch " +
                         std::to_string(*e.dead_at));
    }
    d = e.descriptor;
  }

  const Signature& sig = d.signature;
  Component client;
  client.name = d.provider == "Client" ? "Client_" : "Client";

  ServiceSpec required;
  required.signature = sig;
  required.kind = ServiceKind::Required;
  client.services.emplace(sig.name, required);
  client.required.insert(sig.name);

  ServiceSpec stub;
  stub.signature = {"invoke", sig.params, sig.result};
  stub.precondition = d.precondition;
  stub.kind = ServiceKind::Provided;
  Communication call{ChannelRef::named(b.channel), Direction::Call, sig.name, {}, {}};
  for (const auto& p : sig.params) call.args.push_back(Expr::variable(p.name));
  Communication wait{ChannelRef::named(b.channel), Direction::Await, sig.name, {}, {}};
  if (sig.result) {
    stub.locals.push_back({"r", *sig.result, std::nullopt});
    wait.binders.push_back("r");
  }
  BehaviorELTS& beh = stub.behavior;
  beh.states = {"s0", "s1", "s2"};
  beh.initial = "s0";
  beh.finals = {"s2"};
  beh.transitions.push_back({"s0", Label{std::nullopt, {call}, std::nullopt}, "s1"});
  beh.transitions.push_back({"s1", Label{std::nullopt, {wait}, std::nullopt}, "s2"});
  client.services.emplace("invoke", stub);
  client.provided.insert("invoke");

  Assembly a = link({*d.component, client},
                    {{b.channel, {client.name, sig.name}, {d.provider, d.service}}});
  return run(a, {client.name, "invoke"}, args, seed, max_steps);
}

std::uint64_t Registry::epoch() const {
  auto lock = read_lock();
  return epoch_;
}

std::size_t Registry::size() const {
  auto lock = read_lock();
  return std::count_if(entries_.begin(), entries_.end(),
                       [](const auto& kv) { return !kv.second.dead_at; });
}

bool Registry::is_live(const std::string& id) const {
  auto lock = read_lock();
  auto it = entries_.find(id);
  return it != entries_.end() && !it->second.dead_at;
}

std::optional<ServiceDescriptor> Registry::find(const std::string& id) const {
  auto lock = read_lock();
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.descriptor;
}

std::optional<std::uint64_t> Registry::unregistered_at(const std::string& id) const {
  auto lock = read_lock();
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.dead_at;
}

std::string Registry::export_snapshot() const {
  auto lock = read_lock();
  std::vector<const Entry*> live;
  for (const auto& [id, e] : entries_) {
    if (!e.dead_at) live.push_back(&e);
  }
  std::sort(live.begin(), live.end(),
            [](const Entry* a, const Entry* b) { return a->order < b->order; });
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const Entry* e : live) {
    const ServiceDescriptor& d = e->descriptor;
    arr.push_back({{"id", d.id},
                   {"provider", d.provider},
                   {"service", d.service},
                   {"pre", to_string(d.precondition)},
                   {"post", to_string(d.postcondition)},
                   {"properties", d.properties},
                   {"component", render_component(*d.component)}});
  }
  return arr.dump(2);
}

void Registry::import_snapshot(std::string_view json) {
  nlohmann::json doc = nlohmann::json::parse(json);
  if (!doc.is_array()) throw std::runtime_error("snapshot: expected a JSON array");
  std::vector<std::pair<std::string, ServiceDescriptor>> parsed;
  for (const auto& item : doc) {
    auto comps = parse_component_file(item.at("component").get<std::string>());
    std::string provider = item.at("provider").get<std::string>();
    auto it = std::find_if(comps.begin(), comps.end(),
                           [&](const Component& c) { return c.name == provider; });
    if (it == comps.end()) throw std::runtime_error("snapshot: no component " + provider);
    ServiceDescriptor d =
        make_descriptor(std::make_shared<const Component>(*it), item.at("service"));
    d.properties = item.value("properties", d.properties);
    parsed.emplace_back(item.at("id").get<std::string>(), std::move(d));
  }
  auto lock = write_lock();
  for (const auto& [id, d] : parsed) {
    if (entries_.count(id)) throw DuplicateRegistration("id '" + id + "' already in use");
  }
  for (auto& [id, d] : parsed) {
    insert(std::move(d), id);
    if (id.rfind("svc-", 0) == 0) {
      try {
        next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(id.substr(4)) + 1);
      } catch (const std::exception&) {
      }
    }
  }
}

std::vector<ServiceDescriptor> Federation::discover(const Query& q) const {
  struct Hit {
    std::size_t overlap;
    std::size_t child;
    std::uint64_t order;
    ServiceDescriptor d;
  };
  std::vector<Hit> hits;
  for (std::size_t c = 0; c < children_.size(); ++c) {
    auto lock = children_[c]->read_lock();
    for (const auto& [e, overlap] : children_[c]->matching(q)) {
      hits.push_back({overlap, c, e->order, e->descriptor});
    }
  }
  std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.child != b.child) return a.child < b.child;
    return a.order < b.order;
  });
  std::vector<ServiceDescriptor> out;
  for (auto& h : hits) out.push_back(std::move(h.d));
  return out;
}

}  // namespace kmelia
