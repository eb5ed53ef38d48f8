#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kmelia/parser.hpp"
#include "kmelia/registry.hpp"

namespace kmelia {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string error_name(const std::exception& e) {
  if (dynamic_cast<const DuplicateRegistration*>(&e)) return "DuplicateRegistration";
  if (dynamic_cast<const StaleBinding*>(&e)) return "StaleBinding";
  if (dynamic_cast<const UnknownId*>(&e)) return "UnknownId";
  if (dynamic_cast<const InvalidDescriptor*>(&e)) return "InvalidDescriptor";
  if (dynamic_cast<const InvalidQuery*>(&e)) return "InvalidQuery";
  if (dynamic_cast<const MissingArgument*>(&e)) return "MissingArgument";
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  return "Error";
}

Query query_from(const json& step) {
  Query q;
  if (step.contains("name")) q.name_pattern = step["name"].get<std::string>();
  if (step.contains("arity")) q.param_arity = step["arity"].get<std::size_t>();
  if (step.contains("result")) {
    auto t = type_from_name(step["result"].get<std::string>());
    if (!t) throw std::runtime_error("registry script: unknown result type");
    q.result_type = *t;
  }
  if (step.contains("properties")) {
    q.required_properties = step["properties"].get<std::vector<std::string>>();
  }
  if (step.contains("entails")) q.entailment = parse_expression(step["entails"].get<std::string>());
  return q;
}

Store store_from(const json& obj) {
  Store s;
  for (const auto& [k, v] : obj.items()) {
    if (v.is_boolean()) {
      s[k] = v.get<bool>();
    } else if (v.is_number_integer()) {
      s[k] = v.get<std::int64_t>();
    } else {
      throw std::runtime_error("registry script: argument '" + k + "' must be int or bool");
    }
  }
  return s;
}

}  // namespace

int run_registry_script(const std::filesystem::path& script, std::ostream& out) {
  std::ifstream in(script, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + script.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(script.string() + ": " + e.what());
  }

  std::map<std::string, std::shared_ptr<const Component>> components;
  for (const auto& src : doc.value("sources", json::array())) {
    std::filesystem::path p = src.get<std::string>();
    if (p.is_relative()) p = script.parent_path() / p;
    for (auto& c : load_source_file(p).components) {
      std::string name = c.name;
      components[name] = std::make_shared<const Component>(std::move(c));
    }
  }

  Registry registry;
  std::map<std::string, std::string> ids;
  std::map<std::string, Binding> bindings;
  int status = 0;

  auto resolve_id = [&](const json& step) {
    std::string ref = step.at("ref").get<std::string>();
    auto it = ids.find(ref);
    return it == ids.end() ? ref : it->second;
  };

  const json& steps = doc.at("steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const json& step = steps[i];
    const std::string op = step.at("op").get<std::string>();
    ordered_json line;
    line["step"] = i;
    line["op"] = op;
    std::optional<std::string> expect_error;
    if (step.contains("expect_error")) expect_error = step["expect_error"].get<std::string>();
    bool ok = true;

    try {
      if (op == "register") {
        const std::string cname = step.at("component").get<std::string>();
        auto it = components.find(cname);
        if (it == components.end()) {
          throw std::runtime_error("registry script: unknown component " + cname);
        }
        ServiceDescriptor d = make_descriptor(it->second, step.at("service").get<std::string>());
        if (step.contains("properties")) {
          d.properties = step["properties"].get<std::vector<std::string>>();
        }
        std::string id = registry.register_service(std::move(d));
        if (step.contains("as")) ids[step["as"].get<std::string>()] = id;
        line["id"] = id;
      } else if (op == "discover") {
        auto found = registry.discover(query_from(step));
        ordered_json list = ordered_json::array();
        for (const auto& d : found) list.push_back(d.id);
        line["found"] = list;
        if (step.contains("expect_count") &&
            step["expect_count"].get<std::size_t>() != found.size()) {
          ok = false;
        }
      } else if (op == "bind") {
        Binding b = registry.bind(step.value("client", std::string("client")), resolve_id(step));
        bindings[step.value("as", b.channel)] = b;
        line["channel"] = b.channel;
        line["id"] = b.descriptor_id;
      } else if (op == "unbind") {
        registry.unbind(bindings.at(step.at("binding").get<std::string>()));
      } else if (op == "unregister") {
        registry.unregister(resolve_id(step));
      } else if (op == "invoke") {
        const Binding& b = bindings.at(step.at("binding").get<std::string>());
        RunResult r = registry.invoke(b, store_from(step.value("args", json::object())),
                                      step.value("seed", std::uint64_t{0}),
                                      step.value("max_steps", std::size_t{1000}));
        std::string outcome(outcome_name(r.outcome));
        line["outcome"] = outcome;
        line["events"] = r.trace.size();
        if (step.contains("expect_outcome")) {
          ok = step["expect_outcome"].get<std::string>() == outcome;
        } else {
          ok = r.outcome == Outcome::Success;
        }
      } else if (op == "export") {
        line["snapshot"] = ordered_json::parse(registry.export_snapshot());
      } else {
        throw std::runtime_error("registry script: unknown op '" + op + "'");
      }
      if (expect_error) {
        ok = false;
        line["error"] = nullptr;
      }
    } catch (const RegistryError& e) {
      line["error"] = error_name(e);
      line["detail"] = e.what();
      ok = expect_error && *expect_error == error_name(e);
    } catch (const MissingArgument& e) {
      line["error"] = error_name(e);
      line["detail"] = e.what();
      ok = expect_error && *expect_error == error_name(e);
    } catch (const InvalidQuery& e) {
      line["error"] = error_name(e);
      line["detail"] = e.what();
      ok = expect_error && *expect_error == error_name(e);
    }
    line["epoch"] = registry.epoch();
    line["ok"] = ok;
    out << line.dump() << '\n';
    if (!ok) status = 1;
  }
  return status;
}

}  // namespace kmelia
