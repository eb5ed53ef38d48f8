#include "fixtures.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace fixtures {

std::vector<Fixture> deadlock_corpus() {
  const auto dir = kCorpusDir / "deadlock";
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot read deadlock manifest");
  nlohmann::json doc = nlohmann::json::parse(in);
  std::vector<Fixture> out;
  for (const auto& item : doc) {
    Fixture f;
    const std::filesystem::path path = dir / item.at("assembly").get<std::string>();
    f.name = path.stem().string();
    f.assembly = kmelia::load_assembly_file(path);
    f.entry = kmelia::ServiceKey::parse(item.at("entry").get<std::string>());
    f.deadlock = item.at("deadlock").get<bool>();
    if (const auto* s = f.assembly.find_service(f.entry)) {
      for (const auto& p : s->signature.params) {
        if (p.type == kmelia::Type::Bool) f.args.emplace(p.name, kmelia::Value{true});
        else f.args.emplace(p.name, kmelia::Value{std::int64_t{4}});
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace fixtures
