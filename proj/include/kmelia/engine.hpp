#ifndef KMELIA_ENGINE_HPP_
#define KMELIA_ENGINE_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "kmelia/assembly.hpp"
#include "kmelia/flatten.hpp"
#include "kmelia/model.hpp"

namespace kmelia {

// Operational semantics of an assembly: the per-service execution graphs and
// the enabled moves of a composite state. Shared by the product builder and
// the simulator so both walk the same transition relation.
//
// Every provided service of every component is a slot. A slot's location is
// a node of its flattened behaviour split into segments: a label with several
// communication actions becomes a chain of segments, each holding at most one
// communication (with its surrounding assignments). Original states keep
// their names; intermediate nodes are named `state#<transition>.<segment>`.

inline constexpr int kNoChannel = -1;
inline constexpr int kEnvChannel = -2;

struct SlotState {
  bool active = false;
  // Pre-activated and not yet called; may still accept its wait-start.
  bool fresh = false;
  int node = 0;
  int caller = kNoChannel;
  std::vector<PartialValue> store;

  friend bool operator==(const SlotState&, const SlotState&) = default;
};

struct ProductState {
  std::vector<SlotState> slots;

  friend bool operator==(const ProductState&, const ProductState&) = default;
};

struct ProductStateHash {
  std::size_t operator()(const ProductState& s) const;
};

enum class MoveKind {
  Internal,     // assignments, silent or enter/exit edges of one slot
  Message,      // c!m with c?m
  Call,         // c!!s with CALLER??s, activating the callee
  Result,       // CALLER!!s with c??s, deactivating the callee at a final
  Environment,  // unilateral communication with the environment
};

std::string_view move_kind_name(MoveKind k);

struct SyncLabel {
  MoveKind kind = MoveKind::Internal;
  int channel = kNoChannel;
  std::string channel_name;
  Direction direction = Direction::Send;  // of the actor
  std::string message;
  int actor = -1;
  int actor_segment = -1;
  int partner = -1;
  int partner_segment = -1;

  friend bool operator==(const SyncLabel&, const SyncLabel&) = default;
};

struct ChannelInfo {
  std::string name;
  int server_slot = -1;
  // Message names accepted for call / result on this channel.
  std::set<std::string> service_names;
  std::string client_component;
  // Required service on the client side; empty for SELF channels.
  std::string required_service;
};

struct ResolvedChannel {
  enum class Kind { None, Unresolved, Channel, Caller };
  enum class End { Client, Server };
  Kind kind = Kind::None;
  int channel = kNoChannel;
  End end = End::Client;
};

struct Segment {
  int from = 0;
  int to = 0;
  int transition = 0;
  int index = 0;
  std::optional<Expr> guard;
  std::vector<Assignment> before;
  std::optional<Communication> comm;
  std::vector<Assignment> after;
  std::optional<ScopeMarker> marker;
  ResolvedChannel channel;
  std::string text;
};

struct SlotInfo {
  ServiceKey key;
  ServiceSpec spec;  // flattened
  std::vector<ScopedVar> vars;
  std::vector<std::string> node_names;
  std::vector<bool> node_final;
  int initial = 0;
  std::vector<Segment> segments;
  std::vector<std::vector<int>> outgoing;
  int self_channel = kNoChannel;
  bool unknown_locals = false;
  std::map<std::string, int, std::less<>> var_ids;

  // -1 when the variable is not in scope.
  int var_index(std::string_view name) const;
};

struct EngineOptions {
  // Communications on channels that resolve to nothing become unilateral
  // environment moves (receives bind unknown values) instead of blocking.
  bool open_environment = false;
  // Slots active from the start, waiting for their call.
  std::vector<ServiceKey> preactivated;
  // Slots whose uninitialized locals start unknown rather than 0/false.
  std::set<ServiceKey> unknown_locals;
  std::size_t flatten_depth = kDefaultFlattenDepth;
};

struct UnknownEntry : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Side information about an applied move, used for contract checking.
struct MoveEffects {
  std::vector<PartialValue> args;  // values carried by the communication
  int finished_slot = -1;          // slot deactivated by a result
  std::vector<PartialValue> finished_store;
};

struct Successor {
  SyncLabel label;
  ProductState next;
  MoveEffects effects;
};

struct Expansion {
  std::vector<Successor> successors;
  bool reentrant_attempt = false;  // a call to an active service was blocked
  bool unknown_guard = false;      // some guard evaluated to unknown
};

class Engine {
 public:
  // `entry_args` binds the entry's parameters; missing ones are unknown.
  Engine(const Assembly& assembly, const ServiceKey& entry,
         const PartialStore& entry_args = {}, EngineOptions options = {});

  const Assembly& assembly() const { return assembly_; }
  const std::vector<SlotInfo>& slots() const { return slots_; }
  const std::vector<ChannelInfo>& channels() const { return channels_; }
  int entry_slot() const { return entry_; }
  int slot_index(const ServiceKey& key) const;

  const ProductState& initial_state() const { return initial_; }
  Expansion expand(const ProductState& s) const;

  // All activated services at final states and no call left open.
  bool is_successful(const ProductState& s) const;
  bool is_final_node(int slot, int node) const;

  PartialStore store_of(const ProductState& s, int slot) const;
  static PartialStore store_of(const SlotInfo& info, const std::vector<PartialValue>& store);

  std::string describe(const ProductState& s) const;
  std::string describe(const SyncLabel& l) const;
  std::string channel_name(int channel) const;

 private:
  void compile_slot(SlotInfo& slot, const Component& c);
  ResolvedChannel resolve(const SlotInfo& slot, const Component& c,
                          const Communication& comm) const;
  std::vector<PartialValue> activation_store(const SlotInfo& info,
                                             const std::vector<PartialValue>& params) const;

  Assembly assembly_;
  EngineOptions options_;
  std::vector<SlotInfo> slots_;
  std::vector<ChannelInfo> channels_;
  int entry_ = -1;
  ProductState initial_;
};

}  // namespace kmelia

#endif  // KMELIA_ENGINE_HPP_
