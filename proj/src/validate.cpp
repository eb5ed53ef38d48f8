#include "kmelia/validate.hpp"

#include <sstream>

namespace kmelia {

bool ValidationReport::structurally_ok() const {
  for (const auto& i : issues) {
    if (i.category == ValidationIssue::Category::Structural) return false;
  }
  return true;
}

std::string ValidationReport::to_text() const {
  std::ostringstream os;
  for (const auto& i : issues) {
    os << i.location << ": " << i.message << '\n';
  }
  return os.str();
}

namespace {

using Category = ValidationIssue::Category;

class Checker {
 public:
  explicit Checker(const Component& c) : c_(c) {}

  ValidationReport run() {
    for (const auto& name : c_.provided) {
      if (!c_.find(name)) {
        structural(c_.name, "provided service '" + name + "' has no SERVICE block");
      }
    }
    for (const auto& name : c_.required) {
      if (!c_.find(name)) {
        structural(c_.name, "required service '" + name + "' has no SERVICE block");
      }
    }
    for (const auto& [key, svc] : c_.services) check_service(key, svc);
    return std::move(report_);
  }

 private:
  void structural(std::string loc, std::string msg) {
    report_.issues.push_back({Category::Structural, std::move(loc), std::move(msg)});
  }
  void semantic(std::string loc, std::string msg) {
    report_.issues.push_back({Category::Semantic, std::move(loc), std::move(msg)});
  }

  void check_service(const std::string& key, const ServiceSpec& s) {
    const std::string loc = c_.name + "." + key;
    if (s.name() != key) {
      structural(loc, "signature name '" + s.name() + "' differs from service key");
    }
    bool in_provided = c_.provided.count(key) > 0;
    bool in_required = c_.required.count(key) > 0;
    if (in_required && !in_provided && s.kind != ServiceKind::Required) {
      structural(loc, "service listed in REQUIRES is not a required service");
    }
    if (in_provided && s.kind != ServiceKind::Provided) {
      structural(loc, "service listed in PROVIDES is not a provided service");
    }

    std::set<std::string> seen;
    for (const auto& p : s.signature.params) {
      if (!seen.insert(p.name).second) {
        structural(loc, "duplicate parameter '" + p.name + "'");
      }
    }

    check_dependency(loc, s.dependency);
    check_behavior(loc, s);
    check_semantics(loc, s, seen);
  }

  void check_dependency(const std::string& loc, const Dependency& d) {
    const std::pair<const char*, const std::set<std::string>*> sets[] = {
        {"subs", &d.sub}, {"cals", &d.cal}, {"reqs", &d.req}, {"ints", &d.intern}};
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = i + 1; j < 4; ++j) {
        for (const auto& n : *sets[i].second) {
          if (sets[j].second->count(n)) {
            structural(loc + "/interface",
                       std::string("dependency sets not disjoint: '") + n +
                           "' in both " + sets[i].first + " and " + sets[j].first);
          }
        }
      }
    }
    for (const auto& n : d.sub) {
      if (!c_.find(n)) {
        structural(loc + "/interface", "sub-service '" + n + "' is not a service of " + c_.name);
      }
    }
    for (const auto& n : d.intern) {
      if (!c_.find(n)) {
        structural(loc + "/interface", "internal service '" + n + "' is not a service of " + c_.name);
      }
    }
  }

  void check_behavior(const std::string& loc, const ServiceSpec& s) {
    const BehaviorELTS& b = s.behavior;
    const std::string bloc = loc + "/behaviour";
    if (b.states.empty()) {
      if (s.kind == ServiceKind::Provided) {
        structural(bloc, "provided service has no behaviour");
      }
      return;
    }
    if (!b.states.count(b.initial)) {
      structural(bloc, "initial state '" + b.initial + "' is not declared");
    }
    for (const auto& f : b.finals) {
      if (!b.states.count(f)) structural(bloc, "final state '" + f + "' is not declared");
    }
    for (std::size_t i = 0; i < b.transitions.size(); ++i) {
      const Transition& t = b.transitions[i];
      std::string tloc = bloc + "/transition " + std::to_string(i);
      if (!b.states.count(t.source)) {
        structural(tloc, "source state '" + t.source + "' is not declared");
      }
      if (!b.states.count(t.target)) {
        structural(tloc, "target state '" + t.target + "' is not declared");
      }
    }
    for (const auto& [state, subs] : b.annotations) {
      if (!b.states.count(state)) {
        structural(bloc, "annotated state '" + state + "' is not declared");
      }
      for (const auto& p : subs) {
        if (!s.dependency.sub.count(p)) {
          structural(bloc, "annotation '" + p + "' of state '" + state +
                               "' is not in the service's subs");
        }
      }
    }
  }

  void check_predicate(const std::string& loc, const Expr& e, const TypeEnv& env,
                       const char* what) {
    try {
      if (check_type(e, env) != Type::Bool) {
        semantic(loc, std::string(what) + " is not a boolean predicate");
      }
    } catch (const UnboundVariable& u) {
      semantic(loc, std::string(what) + " uses undeclared variable '" + u.name + "'");
    } catch (const TypeMismatch& m) {
      semantic(loc, std::string(what) + " is ill-typed at '" + m.location + "'");
    }
  }

  std::optional<Type> check_expr(const std::string& loc, const Expr& e,
                                 const TypeEnv& env) {
    try {
      return check_type(e, env);
    } catch (const UnboundVariable& u) {
      semantic(loc, "undeclared variable '" + u.name + "'");
    } catch (const TypeMismatch& m) {
      semantic(loc, "ill-typed expression '" + m.location + "'");
    }
    return std::nullopt;
  }

  void check_semantics(const std::string& loc, const ServiceSpec& s,
                       const std::set<std::string>& params) {
    TypeEnv env;
    for (const auto& p : s.signature.params) env.emplace(p.name, p.type);
    std::set<std::string> names = params;
    for (const auto& l : s.locals) {
      if (l.name == kResultVar && s.signature.result) {
        semantic(loc, "local '" + l.name + "' shadows the implicit result");
      }
      if (!names.insert(l.name).second) {
        semantic(loc, "duplicate variable '" + l.name + "'");
      }
      if (l.init) {
        auto t = check_expr(loc + "/variables", *l.init, env);
        if (t && *t != l.type) {
          semantic(loc + "/variables", "initializer of '" + l.name + "' has the wrong type");
        }
      }
      env.emplace(l.name, l.type);
    }
    check_predicate(loc + "/pre", s.precondition, env, "precondition");
    if (s.signature.result) env.emplace(std::string(kResultVar), *s.signature.result);
    check_predicate(loc + "/post", s.postcondition, env, "postcondition");

    const BehaviorELTS& b = s.behavior;
    for (std::size_t i = 0; i < b.transitions.size(); ++i) {
      const Label& label = b.transitions[i].label;
      std::string tloc = loc + "/behaviour/transition " + std::to_string(i);
      if (label.guard) check_predicate(tloc, *label.guard, env, "guard");
      for (const auto& action : label.actions) {
        if (const auto* a = std::get_if<Assignment>(&action)) {
          auto target = env.find(a->target);
          if (target == env.end()) {
            semantic(tloc, "assignment to undeclared variable '" + a->target + "'");
            continue;
          }
          auto t = check_expr(tloc, a->value, env);
          if (t && *t != target->second) {
            semantic(tloc, "assignment to '" + a->target + "' has the wrong type");
          }
          continue;
        }
        const auto& comm = std::get<Communication>(action);
        for (const auto& arg : comm.args) check_expr(tloc, arg, env);
        for (const auto& binder : comm.binders) {
          if (!env.count(binder)) {
            semantic(tloc, "binder '" + binder + "' is not declared");
          }
        }
        if (comm.channel.kind == ChannelRef::Kind::Caller &&
            s.kind != ServiceKind::Provided) {
          semantic(tloc, "CALLER used outside a provided service");
        }
        if (comm.channel.kind == ChannelRef::Kind::Self &&
            !s.dependency.intern.count(comm.message)) {
          semantic(tloc, "SELF call to '" + comm.message + "' which is not an internal service");
        }
      }
    }
  }

  const Component& c_;
  ValidationReport report_;
};

}  // namespace

ValidationReport validate_component(const Component& c) { return Checker(c).run(); }

}  // namespace kmelia
