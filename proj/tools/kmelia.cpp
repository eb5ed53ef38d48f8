#include <cstdint>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kmelia/analysis.hpp"
#include "kmelia/assembly.hpp"
#include "kmelia/flatten.hpp"
#include "kmelia/parser.hpp"
#include "kmelia/registry.hpp"
#include "kmelia/simulator.hpp"
#include "kmelia/validate.hpp"

namespace {

using namespace kmelia;

constexpr int kClean = 0;
constexpr int kFindings = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Store parse_args(const std::vector<std::string>& items) {
  Store s;
  for (const auto& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError("--arg expects name=value, got '" + item + "'");
    }
    std::string name = item.substr(0, eq);
    std::string text = item.substr(eq + 1);
    if (text == "true" || text == "false") {
      s[name] = text == "true";
      continue;
    }
    try {
      std::size_t used = 0;
      long long v = std::stoll(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      s[name] = static_cast<std::int64_t>(v);
    } catch (const std::exception&) {
      throw UsageError("--arg " + name + ": '" + text + "' is not an integer or boolean");
    }
  }
  return s;
}

ServiceKey entry_key(const std::string& text) {
  try {
    return ServiceKey::parse(text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--entry: ") + e.what());
  }
}

int cmd_parse(const std::string& file) {
  SourceFile src = load_source_file(file);
  std::cout << render_components(src.components);
  return kClean;
}

struct CheckResult {
  std::string text;
  int code = kClean;
};

CheckResult check_one(const std::string& file) {
  CheckResult r;
  std::ostringstream os;
  try {
    SourceFile src = load_source_file(file);
    bool clean = true;
    for (const auto& c : src.components) {
      ValidationReport rep = validate_component(c);
      if (!rep.ok()) {
        clean = false;
        os << file << ": " << c.name << ":\n" << rep.to_text();
      }
    }
    if (clean) os << file << ": ok\n";
    r.code = clean ? kClean : kFindings;
  } catch (const ParseError& e) {
    os << file << ":" << e.what() << "\n";
    r.code = kFindings;
  } catch (const std::exception& e) {
    os << file << ": " << e.what() << "\n";
    r.code = kUsage;
  }
  r.text = os.str();
  return r;
}

int cmd_check(const std::vector<std::string>& files) {
  std::vector<std::future<CheckResult>> jobs;
  for (const auto& f : files) jobs.push_back(std::async(std::launch::async, check_one, f));
  int code = kClean;
  for (auto& j : jobs) {
    CheckResult r = j.get();
    std::cout << r.text;
    code = std::max(code, r.code);
  }
  return code;
}

int cmd_flatten(const std::string& file, const std::string& service,
                const std::string& component) {
  SourceFile src = load_source_file(file);
  const Component* target = nullptr;
  for (const auto& c : src.components) {
    if (component.empty() ? c.find(service) != nullptr : c.name == component) {
      target = &c;
      break;
    }
  }
  if (!target || !target->find(service)) {
    throw UsageError("--service: no service '" + service + "' in " + file);
  }
  Component out = *target;
  out.services.clear();
  out.services.emplace(service, flatten_service(*target, service));
  std::cout << render_component(out);
  return kClean;
}

int cmd_analyze(const std::string& file, const std::string& entry, bool deadlocks,
                const std::string& reach, std::optional<std::size_t> bound,
                const std::vector<std::string>& args, const std::string& format) {
  Assembly a = load_assembly_file(file);
  PartialStore partial;
  for (const auto& [k, v] : parse_args(args)) partial[k] = v;
  auto engine = std::make_shared<const Engine>(a, entry_key(entry), partial);
  std::optional<StatePredicate> goal;
  if (!reach.empty()) {
    try {
      goal = parse_goal(reach);
    } catch (const GoalError& e) {
      throw UsageError(std::string("--reach: ") + e.what());
    }
  }
  ProductLTS p = synchronized_product(engine, bound.value_or(default_bound()));

  std::vector<Verdict> verdicts;
  if (deadlocks || !goal) {
    verdicts = detect_deadlocks(p);
    if (verdicts.empty()) {
      Verdict ok;
      ok.states_explored = p.states.size();
      ok.truncated = p.truncated;
      ok.exact = p.exact;
      verdicts.push_back(ok);
    }
  }
  if (goal) verdicts.push_back(check_reachability(p, *goal));

  bool findings = false;
  for (const auto& v : verdicts) findings = findings || v.kind != Verdict::Kind::Ok;

  if (format == "json") {
    std::cout << verdicts_to_json(verdicts, p) << '\n';
  } else {
    std::cout << "product: " << p.states.size() << " states, " << p.transitions.size()
              << " transitions" << (p.truncated ? " (truncated at bound)" : "") << '\n';
    if (!p.reentrant_states.empty()) {
      std::cout << "re-entrant calls blocked in " << p.reentrant_states.size() << " state(s)\n";
    }
    for (const auto& v : verdicts) std::cout << verdict_to_text(v, *engine);
  }
  if (p.truncated) {
    std::cerr << "warning: product truncated at " << p.bound
              << " states; absence of findings is not guaranteed\n";
  }
  return findings ? kFindings : kClean;
}

int cmd_simulate(const std::string& file, const std::string& entry, std::uint64_t seed,
                 std::size_t max_steps, const std::vector<std::string>& args,
                 const std::string& out_path, bool fatal_post, const std::string& format) {
  Assembly a = load_assembly_file(file);
  SimOptions opts;
  opts.fatal_post = fatal_post;
  RunResult r = run(a, entry_key(entry), parse_args(args), seed, max_steps, opts);
  std::string body = trace_to_jsonl(r.trace);
  std::string outcome(outcome_name(r.outcome));
  std::string summary = format == "json" ? R"({"outcome":")" + outcome + R"(","events":)" +
                                               std::to_string(r.trace.size()) + "}\n"
                                         : "outcome: " + outcome + "\n";
  // With --out the summary is the only stdout; otherwise stdout is the trace.
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << body;
    std::cout << summary;
  } else {
    std::cout << body;
    std::cerr << summary;
  }
  return (r.outcome == Outcome::Deadlock || r.outcome == Outcome::Violation) ? kFindings
                                                                             : kClean;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kmelia component model toolkit"};
  app.require_subcommand(1);

  std::string file;
  auto* parse = app.add_subcommand("parse", "Parse a component file and print its canonical form");
  parse->add_option("FILE", file, "Component source file")->required();

  std::vector<std::string> files;
  auto* check = app.add_subcommand("check", "Validate component files");
  check->add_option("FILE", files, "Component source files")->required();

  std::string service, component;
  auto* flatten = app.add_subcommand("flatten", "Expand state annotations of a service");
  flatten->add_option("FILE", file, "Component source file")->required();
  flatten->add_option("--service", service, "Service to flatten")->required();
  flatten->add_option("--component", component,
                      "Component owning the service (default: the only one that has it)");

  std::string entry, reach, format = "text";
  bool deadlocks = false;
  std::optional<std::size_t> bound;
  std::vector<std::string> args;
  auto* analyze = app.add_subcommand("analyze", "Build the synchronized product of an assembly");
  analyze->add_option("ASM", file, "Assembly JSON file")->required();
  analyze->add_option("--entry", entry, "Entry service as Component.service")->required();
  analyze->add_flag("--deadlocks", deadlocks, "Report deadlocks (default when no --reach)");
  analyze->add_option("--reach", reach, "Goal predicate to search for");
  analyze
      ->add_option("--bound", bound, "Maximum product states (default 100000 or KMELIA_BOUND)")
      ->check(CLI::PositiveNumber);
  analyze->add_option("--arg", args, "Entry argument name=value; unset ones stay unknown");
  analyze->add_option("--format", format, "Report format")
      ->check(CLI::IsMember({"text", "json"}));

  std::uint64_t seed = 0;
  std::size_t max_steps = 1000;
  std::string out_path;
  bool fatal_post = false;
  auto* simulate = app.add_subcommand("simulate", "Run a seeded simulation of an assembly");
  simulate->add_option("ASM", file, "Assembly JSON file")->required();
  simulate->add_option("--entry", entry, "Entry service as Component.service")->required();
  simulate->add_option("--seed", seed, "Scheduler seed");
  simulate->add_option("--max-steps", max_steps, "Step budget");
  simulate->add_option("--arg", args, "Entry argument name=value");
  simulate->add_option("--out", out_path, "Write the JSONL trace here instead of stdout");
  simulate->add_flag("--fatal-post", fatal_post, "Stop at the first postcondition violation");
  simulate->add_option("--format", format, "Summary format")
      ->check(CLI::IsMember({"text", "json"}));

  auto* demo = app.add_subcommand("registry-demo", "Run a scripted registry session");
  demo->add_option("SCRIPT", file, "Registry script JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kClean : kUsage;
  }

  try {
    if (*parse) return cmd_parse(file);
    if (*check) return cmd_check(files);
    if (*flatten) return cmd_flatten(file, service, component);
    if (*analyze) return cmd_analyze(file, entry, deadlocks, reach, bound, args, format);
    if (*simulate) {
      return cmd_simulate(file, entry, seed, max_steps, args, out_path, fatal_post, format);
    }
    if (*demo) return run_registry_script(file, std::cout);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFindings;
  } catch (const AssemblyError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFindings;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
