#include "kmelia/model.hpp"

#include <algorithm>

namespace kmelia {

std::string ChannelRef::text() const {
  switch (kind) {
    case Kind::Caller: return "CALLER";
    case Kind::Self: return "SELF";
    case Kind::Named: break;
  }
  return name;
}

std::string_view direction_symbol(Direction d) {
  switch (d) {
    case Direction::Send: return "!";
    case Direction::Receive: return "?";
    case Direction::Call: return "!!";
    case Direction::Await: return "??";
  }
  return "?";
}

std::vector<Label> BehaviorELTS::labels() const {
  std::vector<Label> out;
  for (const auto& t : transitions) {
    if (std::find(out.begin(), out.end(), t.label) == out.end()) {
      out.push_back(t.label);
    }
  }
  return out;
}

BehaviorELTS BehaviorELTS::single_state(std::string state) {
  BehaviorELTS b;
  b.states.insert(state);
  b.finals.insert(state);
  b.initial = std::move(state);
  return b;
}

std::vector<ScopedVar> scoped_variables(const ServiceSpec& s) {
  std::vector<ScopedVar> vars;
  for (const auto& p : s.signature.params) {
    vars.push_back({p.name, p.type, std::nullopt, true});
  }
  for (const auto& l : s.locals) vars.push_back({l.name, l.type, l.init, false});
  if (s.signature.result) {
    vars.push_back({std::string(kResultVar), *s.signature.result, std::nullopt, false});
  }
  return vars;
}

TypeEnv variable_types(const ServiceSpec& s) {
  TypeEnv env;
  for (const auto& v : scoped_variables(s)) env.emplace(v.name, v.type);
  return env;
}

const ServiceSpec* Component::find(std::string_view service) const {
  auto it = services.find(std::string(service));
  return it == services.end() ? nullptr : &it->second;
}

}  // namespace kmelia
