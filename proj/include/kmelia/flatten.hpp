#ifndef KMELIA_FLATTEN_HPP_
#define KMELIA_FLATTEN_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "kmelia/model.hpp"

namespace kmelia {

inline constexpr std::size_t kDefaultFlattenDepth = 16;

struct DepthExceeded : std::runtime_error {
  DepthExceeded(std::string service, std::size_t limit)
      : std::runtime_error("sub-service nesting through '" + service +
                           "' exceeds depth limit " + std::to_string(limit)),
        service(std::move(service)),
        limit(limit) {}
  std::string service;
  std::size_t limit;
};

// Prefix given to the states and variables of the copy of sub-service `sub`
// inlined at `state`.
std::string inline_prefix(std::string_view state, std::string_view sub);

// Expands every state annotation into an inlined copy of the sub-service with
// an `enter p` edge from the annotated state to the copy's initial state and
// an `exit p` edge from each copy final back to it. The annotated state keeps
// its own transitions. Copied states and the copy's variables are renamed with
// inline_prefix(); the copy's variables are appended to the returned spec's
// locals. Throws DepthExceeded past `depth_limit` nested levels and
// std::out_of_range for an unknown service.
ServiceSpec flatten_service(const Component& c, std::string_view service,
                            std::size_t depth_limit = kDefaultFlattenDepth);

BehaviorELTS flatten_behavior(const Component& c, std::string_view service,
                              std::size_t depth_limit = kDefaultFlattenDepth);

}  // namespace kmelia

#endif  // KMELIA_FLATTEN_HPP_
