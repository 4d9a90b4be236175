#ifndef SDPF_NETSIM_HPP_
#define SDPF_NETSIM_HPP_

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "sdpf/flow.hpp"
#include "sdpf/ids.hpp"
#include "sdpf/lattice.hpp"
#include "sdpf/metrics.hpp"
#include "sdpf/node.hpp"
#include "sdpf/rng.hpp"

#include "json.hpp"

namespace sdpf {

/// Heavy-tailed delay parameters: Pr[tau > t] = (t / x_m)^(-alpha) for
/// t >= x_m.
struct ParetoParams {
  double alpha = 2.0;
  double x_m = 1.0;
};

/// Inverse-CDF sample: x_m * (1 - u)^(-1/alpha), u in [0, 1).
double sample_pareto(const ParetoParams& p, double u);

/// Task/channel latency model. Pareto samples are rounded up to at least one
/// simulated unit to keep the event queue discrete; constant delays are used
/// verbatim (zero models local hand-off).
class DelayModel {
 public:
  static DelayModel constant(SimTime d);
  static DelayModel pareto(ParetoParams p);

  SimTime sample(RngStream& rng) const;
  bool is_constant() const { return kind_ == Kind::Constant; }
  SimTime constant_value() const { return fixed_; }
  const ParetoParams& pareto_params() const { return pareto_; }

 private:
  enum class Kind { Constant, Pareto };
  Kind kind_ = Kind::Constant;
  SimTime fixed_ = 1;
  ParetoParams pareto_;
};

/// Fair-lossy channel: loss and duplication are independent per-transmission
/// events, reordering is emergent from independent per-message delays. With
/// p_loss < 1 and unbounded retries every message is eventually delivered.
struct ChannelConfig {
  double p_loss = 0.0;
  double p_dup = 0.0;
  DelayModel delay = DelayModel::constant(1);
  SimTime ack_timeout = 64;
  std::optional<int> max_retries;  // nullopt = unbounded
};

/// Per-node crash model, charged once per epoch per crashable node. The
/// epoch length is exposed as configuration.
struct FaultConfig {
  double p_f = 0.0;
  SimTime recovery_delay = 16;
  SimTime epoch_length = 32;
};

struct EngineConfig {
  ChannelConfig channel;
  FaultConfig faults;
  DelayModel task_latency = DelayModel::constant(1);
  bool record_trajectories = false;
};

struct TraceReport {
  bool quiescent = false;
  bool fairness_ok = false;
  SimTime end_time = 0;
  std::uint64_t trace_hash = 0;
  std::int64_t sends = 0;
  std::int64_t transmissions = 0;
  std::int64_t delivered = 0;
  std::int64_t duplicate_deliveries = 0;
  std::int64_t dropped_at_dead_node = 0;
  std::int64_t acks = 0;
  std::int64_t nacks = 0;
  std::int64_t retransmissions = 0;
  std::int64_t crashes = 0;
  std::int64_t tasks_done = 0;
  std::int64_t merges = 0;
  std::int64_t occupancy_violations = 0;
  std::int64_t unacked = 0;  // non-quiescence diagnostic
  std::int64_t pending_events = 0;
  /// Canonical text of each hosted target state, keyed by (node, target).
  std::map<std::pair<NodeId, TargetId>, std::string> final_states;
  std::map<NodeId, std::int64_t> node_peak_bytes;
};

nlohmann::json trace_to_json(const TraceReport& report);

/// Deterministic discrete-event engine. One engine owns one logical
/// timeline: (topology, configs, workload, seed) fully determine the trace.
class Engine {
 public:
  Engine(EngineConfig config, std::uint64_t seed);

  NodeId add_node(NodeConfig cfg = {});

  /// Adds the storage-layer node: durable, never crashes, and outside the
  /// ownership pool. Must be added after all worker nodes.
  NodeId add_source_node();

  /// Number of worker nodes (the ownership pool).
  std::size_t worker_count() const { return worker_count_; }

  /// Declares a target hosted at owner_of(target, worker_count) with the
  /// given bottom state.
  void declare_target(TargetId target, JoinValue bottom);
  /// Declares a target replicated on every node (multicast merge targets).
  void declare_replicated_target(TargetId target, JoinValue bottom);

  bool hosts(NodeId node, TargetId target) const;
  std::vector<NodeId> destinations(TargetId target) const;

  /// Schedules one transmission (plus retransmission timeouts) of an
  /// increment. Loss, duplication, and delay are rolled per transmission.
  MsgId send(NodeId src, NodeId dst, const Increment& inc);
  MsgId send_at(SimTime at, NodeId src, NodeId dst, const Increment& inc);

  /// Routes by target: to the owner, or to every node for replicated
  /// targets (one message per replica).
  void send_routed(NodeId src, const Increment& inc);

  void inject_crash(NodeId node, SimTime at);

  /// Runs until the event queue drains or max_time is exceeded. Identical
  /// (config, seed, workload) yields a bit-identical report.
  TraceReport run_until_quiescent(SimTime max_time);

  SimTime now() const { return now_; }
  std::size_t node_count() const { return nodes_.size(); }
  Node& node_at(NodeId id) { return *nodes_.at(id); }
  const Node& node_at(NodeId id) const { return *nodes_.at(id); }
  MetricsLedger& ledger() { return ledger_; }
  const MetricsLedger& ledger() const { return ledger_; }

  void set_registry(std::shared_ptr<const OpRegistry> registry) {
    registry_ = std::move(registry);
  }

  /// Hook invoked (via a scheduled Scan event) after a node's hosted state
  /// changes; the SK runtime uses it to fire Branch on the local replica.
  using ScanFn = std::function<void(Engine&, NodeId)>;
  void set_scan_hook(ScanFn fn) { scan_hook_ = std::move(fn); }

  /// Non-idempotent merge ablation: fold RidKeyedSum payloads into a raw
  /// scalar without rid dedup.
  void set_raw_add_ablation(bool on) { raw_add_ablation_ = on; }

  /// Recorded state sequence for one (node, target); empty unless
  /// record_trajectories was set.
  const std::vector<JoinValue>& trajectory(NodeId node, TargetId target) const;

  nlohmann::json node_snapshot(NodeId node) const;

 private:
  struct Event {
    SimTime time = 0;
    std::uint64_t seq = 0;
    enum class Kind : std::uint8_t {
      Deliver,
      Timeout,
      Crash,
      Recover,
      TaskReady,
      Scan,
      EpochRoll,
    } kind = Kind::Deliver;
    MsgId msg = 0;
    NodeId node = 0;
    std::uint64_t token = 0;

    bool operator>(const Event& other) const {
      if (time != other.time) return time > other.time;
      return seq > other.seq;
    }
  };

  struct Message {
    MsgId id = 0;
    NodeId src = 0;
    NodeId dst = 0;
    enum class Type : std::uint8_t { Data, Ack, Nack } type = Type::Data;
    Increment inc;       // Data only
    MsgId ref = 0;       // Ack/Nack: the data message being answered
    std::int64_t bytes = 0;
    int retries_used = 0;
    bool acked = false;
    bool gave_up = false;
    bool delivered_once = false;
  };

  struct TargetInfo {
    bool replicated = false;
    JoinValue bottom;
  };

  void schedule(SimTime at, Event ev);
  void transmit(Message& m);
  void dispatch(const Event& ev);
  void on_deliver(const Event& ev);
  void on_data(Message& m);
  void on_timeout(MsgId id);
  void on_crash(NodeId id);
  void on_recover(NodeId id);
  void on_task_ready(const Event& ev);
  void on_epoch_roll();

  void admit(Node& n, const Increment& inc, MsgId msg, NodeId reply_to);
  void process_item(Node& n, const PendingItem& item);
  void complete_pair(Node& n, const PendingItem& a, const PendingItem& b,
                     bool b_in_window = true);
  void merge_into(Node& n, const Increment& inc);
  void emit_outputs(Node& n, const std::vector<Increment>& outs);
  void send_ack(const Message& data_msg);
  void send_nack(const Message& data_msg);
  void send_control(Message::Type type, MsgId ref, NodeId src, NodeId dst);
  void request_scan(NodeId node);
  void note_buffer(Node& n);

  EngineConfig config_;
  std::uint64_t seed_;
  RngStream channel_rng_;
  RngStream fault_rng_;
  RngStream latency_rng_;

  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  MsgId next_msg_ = 1;
  std::size_t worker_count_ = 0;
  bool source_added_ = false;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::map<MsgId, Message> msgs_;
  std::map<TargetId, TargetInfo> targets_;
  MetricsLedger ledger_;
  std::shared_ptr<const OpRegistry> registry_;
  ScanFn scan_hook_;
  bool raw_add_ablation_ = false;
  bool epoch_roll_pending_ = false;

  Fnv64 trace_;
  TraceReport stats_;
  std::map<std::pair<NodeId, TargetId>, std::vector<JoinValue>> trajectories_;
};

}  // namespace sdpf

#endif  // SDPF_NETSIM_HPP_
