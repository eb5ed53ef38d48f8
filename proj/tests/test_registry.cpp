#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "expr_oracle.hpp"
#include "fixtures.hpp"
#include "generators.hpp"
#include "kmelia/parser.hpp"
#include "kmelia/registry.hpp"
#include "lifecycle.hpp"

using namespace kmelia;

namespace {

std::shared_ptr<const Component> component_named(const std::string& file, const std::string& name) {
  for (auto& c : load_source_file(fixtures::kCorpusDir / file).components) {
    if (c.name == name) return std::make_shared<const Component>(std::move(c));
  }
  throw std::out_of_range(name);
}

ServiceDescriptor calendar() {
  return make_descriptor(component_named("calendar.kmelia", "Calendar"), "calendar");
}

Query by_name(const std::string& glob) {
  Query q;
  q.name_pattern = glob;
  return q;
}

std::vector<std::string> ids(const std::vector<ServiceDescriptor>& ds) {
  std::vector<std::string> out;
  for (const auto& d : ds) out.push_back(d.id);
  return out;
}

using lifecycle::args_for;
using lifecycle::provider_pool;

}  // namespace

TEST_CASE("register, discover, bind") {
  Registry r;
  CHECK(r.size() == 0);
  CHECK(r.discover(by_name("*")).empty());
  std::string id = r.register_service(calendar());
  CHECK(id == "svc-1");
  CHECK(r.size() == 1);
  CHECK(r.epoch() == 1);
  CHECK(ids(r.discover(by_name("calendar*"))) == std::vector<std::string>{id});
  CHECK(r.discover(by_name("book*")).empty());
  CHECK_THROWS_AS(r.register_service(calendar()), DuplicateRegistration);
  Binding b = r.bind("booking", id);
  CHECK(b.descriptor_id == id);
  CHECK(b.client == "booking");
  CHECK(b.channel == "bind-1");
  CHECK(b.epoch == 2);
  CHECK(r.bind("booking", id).channel == "bind-2");
}

TEST_CASE("query criteria") {
  Registry r;
  std::string cal = r.register_service(calendar());
  ServiceDescriptor prov =
      make_descriptor(component_named("contracts.kmelia", "Prov"), "compute");
  prov.properties = {"math"};
  std::string p = r.register_service(prov);

  Query arity;
  arity.param_arity = 1;
  CHECK(ids(r.discover(arity)) == std::vector<std::string>{cal, p});
  Query result;
  result.result_type = Type::Bool;
  CHECK(r.discover(result).empty());

  SUBCASE("entailment against the precondition") {
    Query q;
    q.entailment = parse_expression("day > 0");
    q.name_pattern = "cal*";
    CHECK(ids(r.discover(q)) == std::vector<std::string>{cal});
    q.entailment = parse_expression("day > -3");
    CHECK(r.discover(q).empty());
  }
  SUBCASE("property overlap orders results") {
    Query q;
    q.param_arity = 1;
    q.required_properties = {"math"};
    CHECK(ids(r.discover(q)) == std::vector<std::string>{p});
    Query any;
    any.param_arity = 1;
    CHECK(property_overlap(q, r.find(p).value()) == 1);
  }
  SUBCASE("a query without criteria is invalid") {
    CHECK_FALSE(Query{}.valid());
    CHECK_THROWS_AS(r.discover(Query{}), InvalidQuery);
  }
}

TEST_CASE("discover orders by overlap then registration") {
  Registry r;
  auto pool = provider_pool();
  std::vector<std::string> reg;
  for (const auto& c : pool) {
    ServiceDescriptor d = make_descriptor(c, *c->provided.begin());
    reg.push_back(r.register_service(d));
  }
  Query q;
  q.name_pattern = "*";
  CHECK(ids(r.discover(q)) == reg);
  // Tags: P0 tag0, P1 tag1, P2 tag2, P3 tag0, P4 tag1, P5 tag2; all "common".
  Query t;
  t.name_pattern = "*";
  t.required_properties = {"tag1", "common"};
  CHECK(ids(r.discover(t)) == std::vector<std::string>{reg[1], reg[4]});
}

TEST_CASE("entailment examples") {
  CHECK(entails(parse_expression("d > 0"), parse_expression("d >= 0")));
  CHECK_FALSE(entails(parse_expression("d >= 0"), parse_expression("d > 0")));
  CHECK(entails(parse_expression("false"), parse_expression("x = 3")));
  CHECK(entails(parse_expression("p and q"), parse_expression("p")));
  CHECK(entails(parse_expression("true"), parse_expression("x * x >= 0")));
  // Only the window is checked: x < 9 holds on -8..8.
  CHECK(entails(parse_expression("true"), parse_expression("x < 9")));
  CHECK_FALSE(entails(parse_expression("true"), parse_expression("x < 9"), {}, -8, 9));
}

TEST_CASE("entailment agrees with exhaustive implication") {
  const TypeEnv vars{{"a", Type::Int}, {"b", Type::Int}, {"p", Type::Bool}};
  gen::Rng r(555);
  int holds = 0;
  for (int i = 0; i < 200; ++i) {
    Expr x = gen::expr(r, Type::Bool, vars, 4);
    Expr y = gen::expr(r, Type::Bool, vars, 4);
    Expr prem = x, concl = y;
    switch (i % 3) {
      case 1: concl = Expr::binary(BinaryOp::Or, x, y); break;
      case 2: prem = Expr::binary(BinaryOp::And, y, x); concl = y; break;
      default: break;
    }
    bool want = oracle::implies(prem, concl, vars);
    CHECK(entails(prem, concl, vars) == want);
    holds += want;
  }
  CHECK(holds >= 100);
}

TEST_CASE("lifecycle errors") {
  Registry r;
  std::string id = r.register_service(calendar());
  Binding b = r.bind("c", id);
  RunResult ok = r.invoke(b, Store{{"day", Value{std::int64_t{3}}}}, 7, 100);
  CHECK(ok.outcome == Outcome::Success);

  RunResult bad = r.invoke(b, Store{{"day", Value{std::int64_t{-1}}}}, 7, 100);
  CHECK(bad.outcome == Outcome::Violation);
  REQUIRE_FALSE(bad.trace.empty());
  CHECK(bad.trace[0].step == 0);
  CHECK(bad.trace[0].kind == EventKind::ContractViolation);

  CHECK_THROWS_AS(r.invoke(b, {}, 0, 100), MissingArgument);

  r.unregister(id);
  CHECK_FALSE(r.is_live(id));
  CHECK(r.unregistered_at(id) == std::optional<std::uint64_t>{r.epoch()});
  CHECK_THROWS_AS(r.invoke(b, Store{{"day", Value{std::int64_t{3}}}}, 7, 100), StaleBinding);
  CHECK_THROWS_AS(r.bind("c", id), UnknownId);
  CHECK_THROWS_AS(r.unregister(id), UnknownId);
  CHECK_THROWS_AS(r.bind("c", "svc-99"), UnknownId);
  r.unbind(b);
  CHECK_THROWS_AS(r.unbind(b), UnknownId);
  CHECK_THROWS_AS(r.invoke(b, {}, 0, 10), UnknownId);

  // Re-registering after unregistration is allowed and gets a fresh id.
  std::string again = r.register_service(calendar());
  CHECK(again != id);
}

TEST_CASE("descriptors must match their component") {
  auto cal = component_named("calendar.kmelia", "Booking");
  CHECK_THROWS_AS(make_descriptor(cal, "calendar"), InvalidDescriptor);
  ServiceDescriptor d = calendar();
  d.signature.params.clear();
  Registry r;
  CHECK_THROWS_AS(r.register_service(d), InvalidDescriptor);
}

TEST_CASE("random operation sequences respect the lifecycle") {
  for (std::uint64_t seed : {2718u, 31u}) {
    lifecycle::Report rep = lifecycle::random_ops(seed, 1000);
    for (const auto& v : rep.violations) MESSAGE(v);
    CHECK(rep.violations.empty());
    CHECK(rep.invoked > 20);
    CHECK(rep.stale >= 5);
    CHECK(rep.discovers > 100);
  }
}

TEST_CASE("every mutation bumps the epoch") {
  Registry r;
  std::uint64_t e0 = r.epoch();
  std::string id = r.register_service(calendar());
  CHECK(r.epoch() == e0 + 1);
  Binding b = r.bind("c", id);
  CHECK(r.epoch() == e0 + 2);
  r.unbind(b);
  CHECK(r.epoch() == e0 + 3);
  r.discover(by_name("*"));
  CHECK(r.epoch() == e0 + 3);
  r.unregister(id);
  CHECK(r.epoch() == e0 + 4);
  try {
    r.unregister(id);
  } catch (const UnknownId&) {
  }
  CHECK(r.epoch() == e0 + 4);
}

TEST_CASE("bind after register always works on a fresh registry") {
  gen::Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    auto c = std::make_shared<const Component>(gen::component(rng, "R" + std::to_string(i)));
    for (const auto& name : c->provided) {
      Registry r;
      std::string id = r.register_service(make_descriptor(c, name));
      auto found = r.discover(by_name(name));
      REQUIRE(ids(found) == std::vector<std::string>{id});
      CHECK_NOTHROW(r.bind("client", found[0].id));
    }
  }
}

TEST_CASE("snapshots round-trip") {
  Registry r;
  auto pool = provider_pool();
  std::vector<std::string> reg;
  for (const auto& c : pool) reg.push_back(r.register_service(make_descriptor(c, *c->provided.begin())));
  r.unregister(reg[2]);
  std::string snap = r.export_snapshot();
  auto j = nlohmann::json::parse(snap);
  CHECK(j.is_array());
  CHECK(j.size() == 5);

  Registry copy;
  copy.import_snapshot(snap);
  CHECK(copy.size() == 5);
  CHECK(copy.export_snapshot() == snap);
  CHECK(ids(copy.discover(by_name("*"))) == ids(r.discover(by_name("*"))));
  CHECK_FALSE(copy.is_live(reg[2]));
  CHECK_THROWS_AS(copy.import_snapshot(snap), DuplicateRegistration);
  CHECK_THROWS(copy.import_snapshot("{}"));
  // Imported descriptors are invocable.
  Binding b = copy.bind("c", reg[0]);
  CHECK(copy.invoke(b, args_for(*copy.find(reg[0])), 0, 50).outcome == Outcome::Success);
}

TEST_CASE("federation merges children with the same ordering") {
  auto pool = provider_pool();
  auto a = std::make_shared<Registry>();
  auto b = std::make_shared<Registry>();
  std::string a0 = a->register_service(make_descriptor(pool[0], "f"));
  std::string a1 = a->register_service(make_descriptor(pool[1], "g"));
  std::string b0 = b->register_service(make_descriptor(pool[4], "f"));
  Federation fed;
  fed.add(a);
  fed.add(b);
  CHECK(fed.children().size() == 2);

  Query q;
  q.name_pattern = "*";
  auto all = fed.discover(q);
  REQUIRE(all.size() == 3);
  CHECK(all[0].provider == "P0");
  CHECK(all[1].provider == "P1");
  CHECK(all[2].provider == "P4");

  q.required_properties = {"tag1"};
  auto tagged = fed.discover(q);
  REQUIRE(tagged.size() == 2);
  CHECK(tagged[0].provider == "P1");
  CHECK(tagged[1].provider == "P4");

  b->unregister(b0);
  CHECK(fed.discover(q).size() == 1);
  CHECK(a0 == b0);  // ids are per registry
}

TEST_CASE("concurrent discovers alongside mutations") {
  Registry r;
  auto pool = provider_pool();
  std::atomic<bool> stop{false};
  std::atomic<int> bad{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 4; ++t) {
    readers.emplace_back([&] {
      while (!stop) {
        for (const auto& d : r.discover(by_name("*"))) {
          if (d.id.empty() || !d.component) ++bad;
        }
      }
    });
  }
  std::vector<std::uint64_t> epochs;
  std::mutex m;
  std::vector<std::thread> writers;
  for (int t = 0; t < 3; ++t) {
    writers.emplace_back([&, t] {
      for (int i = 0; i < 100; ++i) {
        std::size_t k = static_cast<std::size_t>(t * 2 + i % 2);
        try {
          std::string id = r.register_service(make_descriptor(pool[k], *pool[k]->provided.begin()));
          Binding b = r.bind("w", id);
          r.unregister(id);
          std::lock_guard lock(m);
          epochs.push_back(b.epoch);
        } catch (const RegistryError&) {
          ++bad;
        }
      }
    });
  }
  for (auto& w : writers) w.join();
  stop = true;
  for (auto& th : readers) th.join();
  CHECK(bad == 0);
  CHECK(r.size() == 0);
  CHECK(r.epoch() == 900);
  std::sort(epochs.begin(), epochs.end());
  CHECK(std::adjacent_find(epochs.begin(), epochs.end()) == epochs.end());
}

TEST_CASE("registry demo script") {
  std::ostringstream out;
  int status = run_registry_script(fixtures::kCorpusDir / "registry_demo.json", out);
  INFO(out.str());
  CHECK(status == 0);
  std::istringstream lines(out.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j["ok"] == true);
    ++n;
  }
  CHECK(n == 19);
}
