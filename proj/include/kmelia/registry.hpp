#ifndef KMELIA_REGISTRY_HPP_
#define KMELIA_REGISTRY_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kmelia/model.hpp"
#include "kmelia/simulator.hpp"

namespace kmelia {

struct ServiceDescriptor {
  std::string id;  // assigned by the registry
  std::string provider;
  Signature signature;
  Predicate precondition;
  Predicate postcondition;
  std::vector<std::string> properties;
  std::shared_ptr<const Component> component;
  std::string service;

  const ServiceSpec& spec() const;
};

// Descriptor whose fields are copied from the provided service `service`.
ServiceDescriptor make_descriptor(std::shared_ptr<const Component> component,
                                  const std::string& service);

struct Query {
  std::optional<std::string> name_pattern;  // fnmatch glob on the service name
  std::optional<std::size_t> param_arity;
  std::optional<Type> result_type;
  std::vector<std::string> required_properties;
  // The client's guaranteed domain; matches when it implies the precondition.
  std::optional<Predicate> entailment;

  bool valid() const;
};

struct Binding {
  std::string client;
  std::string descriptor_id;
  std::string channel;
  std::uint64_t epoch = 0;

  friend bool operator==(const Binding&, const Binding&) = default;
};

struct RegistryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DuplicateRegistration : RegistryError {
  using RegistryError::RegistryError;
};
struct UnknownId : RegistryError {
  using RegistryError::RegistryError;
};
struct StaleBinding : RegistryError {
  using RegistryError::RegistryError;
};
struct InvalidDescriptor : RegistryError {
  using RegistryError::RegistryError;
};
struct InvalidQuery : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::int64_t kEntailmentMin = -8;
inline constexpr std::int64_t kEntailmentMax = 8;

// premise => conclusion for every assignment of the free variables over
// ints in [lo, hi] and both booleans. Variable types come from `hints`,
// otherwise they are inferred from use.
bool entails(const Predicate& premise, const Predicate& conclusion, const TypeEnv& hints = {},
             std::int64_t lo = kEntailmentMin, std::int64_t hi = kEntailmentMax);

bool matches(const Query& q, const ServiceDescriptor& d);
std::size_t property_overlap(const Query& q, const ServiceDescriptor& d);

// Discover runs under a shared lock; every other operation is exclusive and
// bumps the epoch, which orders them.
class Registry {
 public:
  Registry() = default;
  Registry(const Registry&) = delete;
  Registry& operator=(const Registry&) = delete;

  std::string register_service(ServiceDescriptor d);
  std::vector<ServiceDescriptor> discover(const Query& q) const;
  Binding bind(const std::string& client, const std::string& id);
  void unbind(const Binding& b);
  void unregister(const std::string& id);

  // Runs a client stub against the bound provider over b.channel.
  RunResult invoke(const Binding& b, const Store& args, std::uint64_t seed,
                   std::size_t max_steps) const;

  std::uint64_t epoch() const;
  std::size_t size() const;  // live descriptors
  bool is_live(const std::string& id) const;
  std::optional<ServiceDescriptor> find(const std::string& id) const;
  // Epoch at which `id` was unregistered.
  std::optional<std::uint64_t> unregistered_at(const std::string& id) const;

  // JSON array of live descriptors, each carrying its component source.
  std::string export_snapshot() const;
  void import_snapshot(std::string_view json);

 private:
  struct Entry {
    ServiceDescriptor descriptor;
    std::uint64_t order;
    std::optional<std::uint64_t> dead_at;
  };

  std::vector<std::pair<const Entry*, std::size_t>> matching(const Query& q) const;
  std::string insert(ServiceDescriptor d, std::optional<std::string> id);

  // glibc's shared_mutex prefers readers, so a steady stream of discovers
  // would starve writers. Writers hold the turnstile while they wait, which
  // holds back new readers.
  std::shared_lock<std::shared_mutex> read_lock() const;
  std::unique_lock<std::shared_mutex> write_lock();

  mutable std::mutex turnstile_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Entry> entries_;
  std::map<std::string, Binding> bindings_;  // by channel
  std::uint64_t epoch_ = 0;
  std::uint64_t next_id_ = 1;
  std::uint64_t next_channel_ = 1;
  std::uint64_t next_order_ = 0;

  friend class Federation;
};

// Fans discover out to child registries and merges with the same ordering:
// property overlap first, then child order, then registration order.
class Federation {
 public:
  void add(std::shared_ptr<Registry> child) { children_.push_back(std::move(child)); }
  const std::vector<std::shared_ptr<Registry>>& children() const { return children_; }
  std::vector<ServiceDescriptor> discover(const Query& q) const;

 private:
  std::vector<std::shared_ptr<Registry>> children_;
};

// Runs a registry script (see README) and writes one JSON object per step to
// `out`. Returns 0 when every step behaved as expected and no invocation
// deadlocked or violated a contract, 1 otherwise. Malformed scripts throw.
int run_registry_script(const std::filesystem::path& script, std::ostream& out);

}  // namespace kmelia

#endif  // KMELIA_REGISTRY_HPP_
