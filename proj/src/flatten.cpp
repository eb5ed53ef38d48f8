#include "kmelia/flatten.hpp"

#include <set>

namespace kmelia {

std::string inline_prefix(std::string_view state, std::string_view sub) {
  std::string p(state);
  p += "::";
  p += sub;
  p += "::";
  return p;
}

namespace {

Action rename_action(const Action& action, const std::string& prefix,
                     const std::set<std::string>& vars) {
  auto rn = [&](const std::string& v) { return vars.count(v) ? prefix + v : v; };
  if (const auto* a = std::get_if<Assignment>(&action)) {
    return Assignment{rn(a->target), rename_variables(a->value, rn)};
  }
  Communication c = std::get<Communication>(action);
  for (auto& arg : c.args) arg = rename_variables(arg, rn);
  for (auto& b : c.binders) b = rn(b);
  return c;
}

ServiceSpec flatten_rec(const Component& c, std::string_view name,
                        std::size_t depth, std::size_t limit) {
  if (depth > limit) throw DepthExceeded(std::string(name), limit);
  const ServiceSpec* found = c.find(name);
  if (!found) {
    throw std::out_of_range("unknown service '" + std::string(name) + "' in " + c.name);
  }
  ServiceSpec out = *found;
  BehaviorELTS& b = out.behavior;
  b.annotations.clear();

  for (const auto& [state, subs] : found->behavior.annotations) {
    for (const auto& sub_name : subs) {
      ServiceSpec sub = flatten_rec(c, sub_name, depth + 1, limit);
      const std::string prefix = inline_prefix(state, sub_name);

      std::set<std::string> vars;
      for (const auto& v : scoped_variables(sub)) vars.insert(v.name);
      auto rn = [&](const std::string& v) { return vars.count(v) ? prefix + v : v; };

      for (const auto& v : scoped_variables(sub)) {
        std::optional<Expr> init;
        if (v.init) init = rename_variables(*v.init, rn);
        out.locals.push_back({prefix + v.name, v.type, init});
      }
      for (const auto& s : sub.behavior.states) b.states.insert(prefix + s);
      for (const auto& t : sub.behavior.transitions) {
        Transition copy;
        copy.source = prefix + t.source;
        copy.target = prefix + t.target;
        if (t.label.guard) copy.label.guard = rename_variables(*t.label.guard, rn);
        copy.label.marker = t.label.marker;
        for (const auto& a : t.label.actions) {
          copy.label.actions.push_back(rename_action(a, prefix, vars));
        }
        b.transitions.push_back(std::move(copy));
      }

      Transition enter;
      enter.source = state;
      enter.target = prefix + sub.behavior.initial;
      enter.label.marker = ScopeMarker{ScopeMarker::Kind::Enter, sub_name};
      b.transitions.push_back(std::move(enter));
      for (const auto& f : sub.behavior.finals) {
        Transition exit;
        exit.source = prefix + f;
        exit.target = state;
        exit.label.marker = ScopeMarker{ScopeMarker::Kind::Exit, sub_name};
        b.transitions.push_back(std::move(exit));
      }
    }
  }
  return out;
}

}  // namespace

ServiceSpec flatten_service(const Component& c, std::string_view service,
                            std::size_t depth_limit) {
  return flatten_rec(c, service, 0, depth_limit);
}

BehaviorELTS flatten_behavior(const Component& c, std::string_view service,
                              std::size_t depth_limit) {
  return flatten_service(c, service, depth_limit).behavior;
}

}  // namespace kmelia
