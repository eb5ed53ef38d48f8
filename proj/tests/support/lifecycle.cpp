#include "lifecycle.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "generators.hpp"
#include "kmelia/parser.hpp"

namespace lifecycle {

using namespace kmelia;

namespace {

struct Shape {
  const char* name;
  const char* params;  // declaration text
  const char* binders;
  const char* result_type;
  const char* result_value;
};

const Shape kShapes[] = {
    {"f", "x : int", "x", "int", "x + 1"},
    {"g", "x : int", "x", "int", "1"},
    {"calendar", "day : int", "day", "int", "day"},
    {"h", "", "", "bool", "true"},
    {"f", "x : int, y : int", "x, y", "int", "x * y"},
    {"ping", "", "", nullptr, nullptr},
};

}  // namespace

std::vector<std::shared_ptr<const Component>> provider_pool() {
  std::vector<std::shared_ptr<const Component>> out;
  for (int i = 0; i < 6; ++i) {
    const Shape& s = kShapes[i];
    std::string n = s.name;
    std::string text = "COMPONENT P" + std::to_string(i) + " PROVIDES " + n + " SERVICE " + n +
                       "(" + s.params + ")";
    if (s.result_type) text += std::string(" : ") + s.result_type;
    text += " PROPERTIES tag" + std::to_string(i % 3) + ", common";
    text += " BEHAVIOUR INIT a FINAL c a --- CALLER??" + n + "(" + s.binders + ") ---> b";
    text += " b --- CALLER!!" + n + "(" + (s.result_value ? s.result_value : "") + ") ---> c";
    text += " END END";
    out.push_back(std::make_shared<const Component>(parse_component_file(text).at(0)));
  }
  return out;
}

Store args_for(const ServiceDescriptor& d) {
  Store s;
  for (const auto& p : d.signature.params) {
    if (p.type == Type::Bool) s.emplace(p.name, Value{true});
    else s.emplace(p.name, Value{std::int64_t{2}});
  }
  return s;
}

Report random_ops(std::uint64_t seed, int ops) {
  auto pool = provider_pool();
  gen::Rng rng(seed);
  Registry r;
  Report rep;
  std::map<std::string, std::size_t> live;  // id -> pool index
  std::map<std::string, std::uint64_t> dead_at;
  std::vector<Binding> held;
  std::set<std::string> unbound;
  std::vector<std::string> every_id{"svc-404"};
  std::uint64_t last_epoch = r.epoch();

  auto fail = [&](int step, const std::string& what) {
    rep.violations.push_back("op " + std::to_string(step) + ": " + what);
  };
  // Runs `f`, which must throw exactly E.
  auto expect_throw = [&]<class E>(int step, const char* what, auto&& f) {
    try {
      f();
    } catch (const E&) {
      return;
    } catch (const std::exception& e) {
      fail(step, std::string(what) + " threw the wrong error: " + e.what());
      return;
    }
    fail(step, std::string(what) + " did not throw");
  };

  for (int step = 0; step < ops; ++step) {
    ++rep.ops;
    const std::uint64_t before = r.epoch();
    bool mutated = false;
    switch (rng.range(0, 5)) {
      case 0: {
        std::size_t k = static_cast<std::size_t>(rng.range(0, 5));
        bool dup = std::any_of(live.begin(), live.end(), [&](auto& e) { return e.second == k; });
        ServiceDescriptor d = make_descriptor(pool[k], *pool[k]->provided.begin());
        if (dup) {
          expect_throw.operator()<DuplicateRegistration>(step, "duplicate register",
                                                         [&] { r.register_service(d); });
        } else {
          std::string id = r.register_service(d);
          if (live.count(id) || dead_at.count(id)) fail(step, "reused id " + id);
          live[id] = k;
          every_id.push_back(id);
          ++rep.registered;
          mutated = true;
        }
        break;
      }
      case 1: {
        Query q;
        q.name_pattern = rng.pick(std::vector<std::string>{"*", "f", "g*", "[fh]*", "cal?ndar"});
        if (rng.chance(0.3)) q.param_arity = static_cast<std::size_t>(rng.range(0, 2));
        if (rng.chance(0.2)) q.required_properties = {"tag" + std::to_string(rng.range(0, 2))};
        std::set<std::string> want;
        for (const auto& [id, k] : live) {
          if (matches(q, *r.find(id))) want.insert(id);
        }
        std::set<std::string> got;
        for (const auto& d : r.discover(q)) {
          if (!live.count(d.id)) fail(step, "discover returned dead " + d.id);
          got.insert(d.id);
        }
        if (got != want) fail(step, "discover returned the wrong set");
        ++rep.discovers;
        break;
      }
      case 2: {
        std::string id = rng.pick(every_id);
        if (live.count(id)) {
          Binding b = r.bind("client", id);
          if (b.epoch != r.epoch()) fail(step, "binding epoch is not the registry epoch");
          held.push_back(b);
          mutated = true;
        } else {
          expect_throw.operator()<UnknownId>(step, "bind to dead id", [&] { r.bind("client", id); });
        }
        break;
      }
      case 3: {
        std::string id = rng.pick(every_id);
        if (live.count(id)) {
          r.unregister(id);
          live.erase(id);
          dead_at[id] = r.epoch();
          if (r.unregistered_at(id) != std::optional<std::uint64_t>{r.epoch()}) {
            fail(step, "unregistration epoch not recorded");
          }
          mutated = true;
        } else {
          expect_throw.operator()<UnknownId>(step, "unregister dead id",
                                             [&] { r.unregister(id); });
        }
        break;
      }
      case 4: {
        if (held.empty()) break;
        // Half the time aim at a binding that should still work, so live
        // invocations are not crowded out as stale bindings pile up.
        std::vector<Binding> usable;
        for (const auto& h : held) {
          if (!unbound.count(h.channel) && !dead_at.count(h.descriptor_id)) usable.push_back(h);
        }
        Binding b = !usable.empty() && rng.chance(0.5) ? rng.pick(usable) : rng.pick(held);
        auto dead = dead_at.find(b.descriptor_id);
        bool stale = dead != dead_at.end() && dead->second > b.epoch;
        if (unbound.count(b.channel)) {
          expect_throw.operator()<UnknownId>(step, "invoke unbound",
                                             [&] { r.invoke(b, {}, 0, 50); });
        } else if (stale) {
          expect_throw.operator()<StaleBinding>(step, "invoke stale",
                                                [&] { r.invoke(b, {}, 0, 50); });
          ++rep.stale;
        } else {
          try {
            RunResult res = r.invoke(b, args_for(*r.find(b.descriptor_id)), 1, 50);
            if (res.outcome != Outcome::Success) fail(step, "live invocation did not succeed");
          } catch (const std::exception& e) {
            fail(step, std::string("live invocation threw: ") + e.what());
          }
          ++rep.invoked;
        }
        break;
      }
      default: {
        if (held.empty()) break;
        Binding b = rng.pick(held);
        if (unbound.count(b.channel)) {
          expect_throw.operator()<UnknownId>(step, "double unbind", [&] { r.unbind(b); });
        } else {
          r.unbind(b);
          unbound.insert(b.channel);
          mutated = true;
        }
        break;
      }
    }
    if (mutated ? r.epoch() <= before : r.epoch() != before) {
      fail(step, "epoch did not move with the mutation");
    }
    if (r.epoch() < last_epoch) fail(step, "epoch went backwards");
    last_epoch = r.epoch();
    if (r.size() != live.size()) fail(step, "size disagrees with the live set");
  }
  return rep;
}

}  // namespace lifecycle
