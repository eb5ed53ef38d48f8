#ifndef KMELIA_TESTS_FIXTURES_HPP_
#define KMELIA_TESTS_FIXTURES_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "kmelia/assembly.hpp"

namespace fixtures {

inline const std::filesystem::path kCorpusDir = KMELIA_CORPUS_DIR;

struct Fixture {
  std::string name;
  kmelia::Assembly assembly;
  kmelia::ServiceKey entry;
  bool deadlock = false;
  kmelia::Store args;  // concrete entry arguments for simulation
};

// The assemblies listed in corpus/deadlock/manifest.json with their known status.
std::vector<Fixture> deadlock_corpus();

}  // namespace fixtures

#endif  // KMELIA_TESTS_FIXTURES_HPP_
