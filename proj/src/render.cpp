#include <sstream>

#include "kmelia/parser.hpp"

namespace kmelia {

namespace {

template <class Range>
std::string join(const Range& items, std::string_view sep = ", ") {
  std::string out;
  bool first = true;
  for (const auto& item : items) {
    if (!first) out += sep;
    out += item;
    first = false;
  }
  return out;
}

void render_service(const ServiceSpec& s, std::ostringstream& os) {
  os << "  SERVICE " << s.name() << '(';
  bool first = true;
  for (const auto& p : s.signature.params) {
    if (!first) os << ", ";
    os << p.name << " : " << type_name(p.type);
    first = false;
  }
  os << ')';
  if (s.signature.result) os << " : " << type_name(*s.signature.result);
  os << '\n';

  const Dependency& d = s.dependency;
  os << "    INTERFACE\n"
     << "      subs : {" << join(d.sub) << "}\n"
     << "      cals : {" << join(d.cal) << "}\n"
     << "      reqs : {" << join(d.req) << "}\n"
     << "      ints : {" << join(d.intern) << "}\n";
  if (!s.properties.empty()) os << "    PROPERTIES " << join(s.properties) << '\n';
  os << "    PRE " << to_string(s.precondition) << '\n';
  os << "    POST " << to_string(s.postcondition) << '\n';
  if (!s.locals.empty()) {
    os << "    VARIABLES\n";
    for (std::size_t i = 0; i < s.locals.size(); ++i) {
      const VarDecl& v = s.locals[i];
      os << "      " << v.name << " : " << type_name(v.type);
      if (v.init) os << " := " << to_string(*v.init);
      os << (i + 1 < s.locals.size() ? ";\n" : "\n");
    }
  }

  const BehaviorELTS& b = s.behavior;
  os << "    BEHAVIOUR\n";
  if (!b.states.empty()) {
    os << "      STATES " << join(b.states) << '\n';
    os << "      INIT " << b.initial << '\n';
    if (!b.finals.empty()) os << "      FINAL " << join(b.finals) << '\n';
    for (const auto& [state, subs] : b.annotations) {
      if (!subs.empty()) os << "      ANNOTATE " << state << " : " << join(subs) << '\n';
    }
    for (const auto& t : b.transitions) {
      std::string label = render_label(t.label);
      os << "      " << t.source << " --- " << label << (label.empty() ? "" : " ")
         << "---> " << t.target << '\n';
    }
  }
  os << "  END\n";
}

}  // namespace

std::string render_action(const Action& a) {
  if (const auto* as = std::get_if<Assignment>(&a)) {
    return as->target + " := " + to_string(as->value);
  }
  const auto& c = std::get<Communication>(a);
  std::string out = c.channel.text();
  out += direction_symbol(c.direction);
  out += c.message;
  out += '(';
  if (is_output(c.direction)) {
    std::vector<std::string> args;
    for (const auto& e : c.args) args.push_back(to_string(e));
    out += join(args);
  } else {
    out += join(c.binders);
  }
  out += ')';
  return out;
}

std::string render_label(const Label& l) {
  if (l.marker) {
    return std::string(l.marker->kind == ScopeMarker::Kind::Enter ? "enter " : "exit ") +
           l.marker->service;
  }
  std::string out;
  if (l.guard) out = "[" + to_string(*l.guard) + "]";
  for (std::size_t i = 0; i < l.actions.size(); ++i) {
    if (!out.empty()) out += i == 0 ? " " : "; ";
    out += render_action(l.actions[i]);
  }
  return out;
}

std::string render_component(const Component& c) {
  std::ostringstream os;
  os << "COMPONENT " << c.name << '\n';
  if (!c.provided.empty()) os << "  PROVIDES " << join(c.provided) << '\n';
  if (!c.required.empty()) os << "  REQUIRES " << join(c.required) << '\n';
  for (const auto& [name, s] : c.services) render_service(s, os);
  os << "END\n";
  return os.str();
}

std::string render_components(const std::vector<Component>& cs) {
  std::string out;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (i) out += '\n';
    out += render_component(cs[i]);
  }
  return out;
}

}  // namespace kmelia
