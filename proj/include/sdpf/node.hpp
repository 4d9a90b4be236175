#ifndef SDPF_NODE_HPP_
#define SDPF_NODE_HPP_

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <utility>

#include "sdpf/flow.hpp"
#include "sdpf/ids.hpp"
#include "sdpf/lattice.hpp"

namespace sdpf {

/// Deterministic target partitioning: every node computes the same owner
/// without a directory service.
NodeId owner_of(TargetId target, std::size_t node_count);

struct NodeConfig {
  /// Window capacity in increments; nullopt = unbounded (the hoarding foil).
  std::optional<std::size_t> window_capacity;
  /// Whether epoch crash rolls apply. The source node models the durable
  /// storage layer and is not crashable.
  bool crashable = true;
};

struct PendingItem {
  Increment inc;
  MsgId msg = 0;
  NodeId reply_to = 0;
};

/// Volatile window plus durable per-target accumulators. All mutation
/// happens inside engine event handlers; a node is owned by exactly one
/// engine timeline.
class Node {
 public:
  Node(NodeId id, NodeConfig cfg) : id_(id), cfg_(cfg) {}

  NodeId id() const { return id_; }
  const NodeConfig& config() const { return cfg_; }
  bool alive() const { return alive_; }

  std::size_t occupancy() const { return queue_.size() + parked_.size(); }
  std::int64_t window_bytes() const { return window_bytes_; }

  bool hosts(TargetId t) const { return owned_.count(t) != 0; }
  const JoinValue& state_of(TargetId t) const { return owned_.at(t); }
  const std::map<TargetId, JoinValue>& owned_targets() const { return owned_; }

  /// Raw scalar accumulator used by the rid-off ablation.
  std::int64_t raw_total(TargetId t) const {
    auto it = raw_totals_.find(t);
    return it == raw_totals_.end() ? 0 : it->second;
  }

  bool seen(TargetId t, const Rid& rid) const;
  void remember(TargetId t, const Rid& rid);

  /// Rids fired by the SK scan hook (volatile; refiring after a crash is
  /// idempotent by construction).
  std::set<Rid>& fired_rids() { return fired_rids_; }

 private:
  friend class Engine;

  static constexpr std::size_t kSeenCapacity = 1024;

  NodeId id_;
  NodeConfig cfg_;
  bool alive_ = true;
  bool processing_ = false;
  bool scan_pending_ = false;
  std::uint64_t busy_token_ = 0;  // invalidates in-flight TaskReady on crash

  std::deque<PendingItem> queue_;
  std::map<std::pair<TargetId, std::uint64_t>, PendingItem> parked_;
  std::set<std::pair<TargetId, Rid>> pending_rids_;
  std::int64_t window_bytes_ = 0;

  std::map<TargetId, JoinValue> owned_;  // durable: survives crashes
  std::map<TargetId, std::int64_t> raw_totals_;
  std::map<TargetId, std::deque<Rid>> seen_fifo_;
  std::map<TargetId, std::set<Rid>> seen_;
  std::set<Rid> fired_rids_;
};

}  // namespace sdpf

#endif  // SDPF_NODE_HPP_
