#include "kmelia/assembly.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kmelia/parser.hpp"

namespace kmelia {

ServiceKey ServiceKey::parse(std::string_view text) {
  auto dot = text.rfind('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size()) {
    throw std::invalid_argument("expected Component.service, got '" +
                                std::string(text) + "'");
  }
  return {std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
}

const Component* Assembly::find_component(std::string_view name) const {
  for (const auto& c : components_) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const ServiceSpec* Assembly::find_service(const ServiceKey& key) const {
  const Component* c = find_component(key.component);
  return c ? c->find(key.service) : nullptr;
}

bool signatures_compatible(const Signature& required, const Signature& provided) {
  if (required.params.size() != provided.params.size()) return false;
  for (std::size_t i = 0; i < required.params.size(); ++i) {
    if (required.params[i].type != provided.params[i].type) return false;
  }
  return required.result == provided.result;
}

namespace {

template <class F>
void for_each_comm(const ServiceSpec& s, F&& f) {
  for (const auto& t : s.behavior.transitions) {
    for (const auto& a : t.label.actions) {
      if (const auto* c = std::get_if<Communication>(&a)) f(*c);
    }
  }
}

}  // namespace

Assembly link(std::vector<Component> components, std::vector<Link> links) {
  Assembly a;
  std::set<std::string> names;
  for (const auto& c : components) {
    if (!names.insert(c.name).second) {
      throw UnresolvedEndpoint("component name '" + c.name + "' is ambiguous");
    }
  }
  a.components_ = std::move(components);

  std::set<std::string> channels;
  std::set<ServiceKey> bound;
  for (const auto& l : links) {
    const Component* from = a.find_component(l.from.component);
    if (!from || !from->required.count(l.from.service) || !from->find(l.from.service)) {
      throw UnresolvedEndpoint("link '" + l.channel + "': " + l.from.str() +
                               " is not a required service");
    }
    const Component* to = a.find_component(l.to.component);
    if (!to || !to->provided.count(l.to.service) || !to->find(l.to.service)) {
      throw UnresolvedEndpoint("link '" + l.channel + "': " + l.to.str() +
                               " is not a provided service");
    }
    if (!signatures_compatible(from->find(l.from.service)->signature,
                               to->find(l.to.service)->signature)) {
      throw SignatureMismatch("link '" + l.channel + "': " + l.from.str() +
                              " and " + l.to.str() + " have incompatible signatures");
    }
    if (!channels.insert(l.channel).second) {
      throw DuplicateChannel("channel '" + l.channel + "' is used by two links");
    }
    if (!bound.insert(l.from).second) {
      throw DuplicateChannel(l.from.str() + " is already bound by another channel");
    }
  }
  a.links_ = std::move(links);

  for (const auto& c : a.components_) {
    for (const auto& [name, s] : c.services) {
      for_each_comm(s, [&](const Communication& comm) {
        if (comm.channel.kind != ChannelRef::Kind::Named) return;
        const std::string& n = comm.channel.name;
        if (c.required.count(n) || s.dependency.cal.count(n) || s.dependency.req.count(n)) {
          return;
        }
        for (const auto& l : a.links_) {
          if (l.channel == n &&
              (l.from.component == c.name || l.to.component == c.name)) {
            return;
          }
        }
        throw UnresolvedEndpoint("channel '" + n + "' used by " + c.name + "." + name +
                                 " matches no link or requirement");
      });
    }
  }
  return a;
}

namespace {

// Component of the peer reached through a named channel used in `c`, if the
// channel resolves to a link whose other side is a different component.
const Link* link_for_named(const Assembly& a, const Component& c, const std::string& n) {
  for (const auto& l : a.links()) {
    bool named = l.channel == n || (l.from.component == c.name && l.from.service == n);
    if (named && l.from.component == c.name) return &l;
  }
  return nullptr;
}

std::set<std::string> reachable_from(const Component& c, const std::set<std::string>& roots) {
  std::set<std::string> seen(roots);
  std::vector<std::string> work(roots.begin(), roots.end());
  while (!work.empty()) {
    std::string s = work.back();
    work.pop_back();
    const ServiceSpec* spec = c.find(s);
    if (!spec) continue;
    for (const auto* set : {&spec->dependency.sub, &spec->dependency.intern}) {
      for (const auto& n : *set) {
        if (seen.insert(n).second) work.push_back(n);
      }
    }
  }
  return seen;
}

}  // namespace

DependencyReport check_dependencies(const Assembly& a) {
  DependencyReport report;
  using Rule = DependencyFinding::Rule;

  // Rule (i): a service's cal requirements must be provided by whoever calls it.
  auto check_caller = [&](const Component& caller, const ServiceKey& callee_key,
                          const std::string& via) {
    const ServiceSpec* callee = a.find_service(callee_key);
    if (!callee) return;
    for (const auto& r : callee->dependency.cal) {
      if (!caller.provided.count(r)) {
        report.findings.push_back(
            {Rule::CallerMustProvide, callee_key.str(),
             callee_key.service + " requires '" + r + "' from its caller " + caller.name +
                 " (via " + via + "), which does not provide it"});
      }
    }
  };
  for (const auto& l : a.links()) {
    if (const Component* caller = a.find_component(l.from.component)) {
      check_caller(*caller, l.to, "channel " + l.channel);
    }
  }
  for (const auto& c : a.components()) {
    std::set<std::string> self_called;
    for (const auto& [name, s] : c.services) {
      for_each_comm(s, [&](const Communication& comm) {
        if (comm.channel.kind == ChannelRef::Kind::Self &&
            comm.direction == Direction::Call) {
          self_called.insert(comm.message);
        }
      });
    }
    for (const auto& q : self_called) check_caller(c, {c.name, q}, "SELF");
  }

  // Rule (ii): q in sub_r outside the component interface is only reachable
  // through an interaction with r.
  for (const auto& d : a.components()) {
    std::map<std::string, std::set<std::string>> owners;
    for (const auto& [name, s] : d.services) {
      for (const auto& q : s.dependency.sub) {
        if (!d.provided.count(q)) owners[q].insert(name);
      }
    }
    for (const auto& [q, roots] : owners) {
      std::set<std::string> allowed = reachable_from(d, roots);
      for (const auto& [name, s] : d.services) {
        if (allowed.count(name)) continue;
        bool uses = false;
        for_each_comm(s, [&](const Communication& comm) {
          if (comm.channel.kind == ChannelRef::Kind::Self && comm.message == q) uses = true;
        });
        for (const auto& [state, subs] : s.behavior.annotations) {
          if (subs.count(q)) uses = true;
        }
        if (uses) {
          report.findings.push_back(
              {Rule::ScopeViolation, d.name + "." + name,
               name + " uses '" + q + "', which is only accessible during an interaction with " +
                   *roots.begin()});
        }
      }
      for (const auto& e : a.components()) {
        if (e.name == d.name) continue;
        for (const auto& [name, s] : e.services) {
          bool uses = false;
          for_each_comm(s, [&](const Communication& comm) {
            if (comm.channel.kind != ChannelRef::Kind::Named || comm.message != q) return;
            const Link* l = link_for_named(a, e, comm.channel.name);
            if (l && l->to.component == d.name) uses = true;
          });
          if (uses) {
            report.findings.push_back(
                {Rule::ScopeViolation, e.name + "." + name,
                 name + " references '" + d.name + "." + q +
                     "' outside an interaction with " + *roots.begin()});
          }
        }
      }
    }
  }
  return report;
}

Assembly assembly_from_json(std::string_view json_text,
                            const std::filesystem::path& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("assembly file: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("components") || !doc["components"].is_array()) {
    throw std::runtime_error("assembly file: missing \"components\" array");
  }
  std::vector<Component> components;
  for (const auto& entry : doc["components"]) {
    std::filesystem::path p = entry.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    for (auto& c : load_source_file(p).components) components.push_back(std::move(c));
  }
  std::vector<Link> links;
  if (doc.contains("links")) {
    for (const auto& l : doc["links"]) {
      links.push_back({l.at("channel").get<std::string>(),
                       ServiceKey::parse(l.at("from").get<std::string>()),
                       ServiceKey::parse(l.at("to").get<std::string>())});
    }
  }
  return link(std::move(components), std::move(links));
}

Assembly load_assembly_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return assembly_from_json(ss.str(), path.parent_path());
}

}  // namespace kmelia
