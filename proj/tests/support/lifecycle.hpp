#ifndef KMELIA_TESTS_LIFECYCLE_HPP_
#define KMELIA_TESTS_LIFECYCLE_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "kmelia/registry.hpp"

namespace lifecycle {

// Components P0..P5, each providing one service of a distinct shape with
// properties tag<i%3> and common.
std::vector<std::shared_ptr<const kmelia::Component>> provider_pool();

// Arguments of the right types for a descriptor's parameters.
kmelia::Store args_for(const kmelia::ServiceDescriptor& d);

struct Report {
  int ops = 0;
  int registered = 0;
  int discovers = 0;
  int invoked = 0;
  int stale = 0;
  std::vector<std::string> violations;  // empty when every invariant held
};

// Random register/discover/bind/unbind/unregister/invoke sequence checked
// against a model of which ids are live and which bindings are stale.
Report random_ops(std::uint64_t seed, int ops);

}  // namespace lifecycle

#endif  // KMELIA_TESTS_LIFECYCLE_HPP_
