#include "sdpf/netsim.hpp"

#include <algorithm>
#include <cmath>

namespace sdpf {

double sample_pareto(const ParetoParams& p, double u) {
  return p.x_m * std::pow(1.0 - u, -1.0 / p.alpha);
}

DelayModel DelayModel::constant(SimTime d) {
  DelayModel m;
  m.kind_ = Kind::Constant;
  m.fixed_ = d;
  return m;
}

DelayModel DelayModel::pareto(ParetoParams p) {
  DelayModel m;
  m.kind_ = Kind::Pareto;
  m.pareto_ = p;
  return m;
}

SimTime DelayModel::sample(RngStream& rng) const {
  if (kind_ == Kind::Constant) return fixed_;
  double d = sample_pareto(pareto_, rng.uniform01());
  auto t = static_cast<SimTime>(std::ceil(d));
  return t < 1 ? 1 : t;
}

nlohmann::json trace_to_json(const TraceReport& r) {
  nlohmann::json states = nlohmann::json::array();
  for (const auto& [key, text] : r.final_states) {
    states.push_back({{"node", key.first},
                      {"target", to_hex(key.second)},
                      {"state", text}});
  }
  nlohmann::json peaks = nlohmann::json::array();
  for (const auto& [node, bytes] : r.node_peak_bytes) {
    peaks.push_back({{"node", node}, {"peak_bytes", bytes}});
  }
  return nlohmann::json{
      {"quiescent", r.quiescent},
      {"fairness_ok", r.fairness_ok},
      {"end_time", r.end_time},
      {"trace_hash", to_hex(r.trace_hash)},
      {"sends", r.sends},
      {"transmissions", r.transmissions},
      {"delivered", r.delivered},
      {"duplicate_deliveries", r.duplicate_deliveries},
      {"dropped_at_dead_node", r.dropped_at_dead_node},
      {"acks", r.acks},
      {"nacks", r.nacks},
      {"retransmissions", r.retransmissions},
      {"crashes", r.crashes},
      {"tasks_done", r.tasks_done},
      {"merges", r.merges},
      {"occupancy_violations", r.occupancy_violations},
      {"unacked", r.unacked},
      {"pending_events", r.pending_events},
      {"final_states", states},
      {"node_peaks", peaks},
  };
}

Engine::Engine(EngineConfig config, std::uint64_t seed)
    : config_(config),
      seed_(seed),
      channel_rng_(RngStream::derive(seed, "channel")),
      fault_rng_(RngStream::derive(seed, "fault")),
      latency_rng_(RngStream::derive(seed, "latency")) {}

NodeId Engine::add_node(NodeConfig cfg) {
  if (source_added_) {
    throw RoutingError("worker nodes must be added before the source node");
  }
  auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(std::make_unique<Node>(id, cfg));
  worker_count_++;
  return id;
}

NodeId Engine::add_source_node() {
  auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(std::make_unique<Node>(id, NodeConfig{.crashable = false}));
  source_added_ = true;
  return id;
}

void Engine::declare_target(TargetId target, JoinValue bottom) {
  targets_[target] = TargetInfo{false, bottom};
  NodeId owner = owner_of(target, worker_count_);
  nodes_[owner]->owned_.emplace(target, bottom);
  if (config_.record_trajectories) {
    trajectories_[{owner, target}].push_back(bottom);
  }
}

void Engine::declare_replicated_target(TargetId target, JoinValue bottom) {
  targets_[target] = TargetInfo{true, bottom};
  for (std::size_t i = 0; i < worker_count_; ++i) {
    nodes_[i]->owned_.emplace(target, bottom);
    if (config_.record_trajectories) {
      trajectories_[{nodes_[i]->id(), target}].push_back(bottom);
    }
  }
}

bool Engine::hosts(NodeId node, TargetId target) const {
  return nodes_.at(node)->hosts(target);
}

std::vector<NodeId> Engine::destinations(TargetId target) const {
  auto it = targets_.find(target);
  if (it == targets_.end()) {
    throw RoutingError("undeclared target " + to_hex(target));
  }
  if (it->second.replicated) {
    std::vector<NodeId> workers;
    for (std::size_t i = 0; i < worker_count_; ++i) {
      workers.push_back(nodes_[i]->id());
    }
    return workers;
  }
  return {owner_of(target, worker_count_)};
}

void Engine::schedule(SimTime at, Event ev) {
  ev.time = at;
  ev.seq = next_seq_++;
  queue_.push(ev);
}

MsgId Engine::send(NodeId src, NodeId dst, const Increment& inc) {
  return send_at(now_, src, dst, inc);
}

MsgId Engine::send_at(SimTime at, NodeId src, NodeId dst, const Increment& inc) {
  Message m;
  m.id = next_msg_++;
  m.src = src;
  m.dst = dst;
  m.type = Message::Type::Data;
  m.inc = inc;
  m.bytes = inc.size_bytes();
  auto [it, _] = msgs_.emplace(m.id, std::move(m));
  stats_.sends++;
  SimTime saved = now_;
  now_ = at;
  transmit(it->second);
  now_ = saved;
  return it->first;
}

void Engine::send_routed(NodeId src, const Increment& inc) {
  for (NodeId dst : destinations(inc.meta.target)) send(src, dst, inc);
}

void Engine::inject_crash(NodeId node, SimTime at) {
  schedule(at, Event{.kind = Event::Kind::Crash, .node = node});
}

// One transmission attempt: the loss roll is drawn first, then the
// duplication roll, then any delays, so the draw sequence is stable for a
// given seed. Bytes are charged per attempt, delivered or not.
void Engine::transmit(Message& m) {
  stats_.transmissions++;
  ledger_.add_net_bytes(m.bytes);
  bool lost = channel_rng_.chance(config_.channel.p_loss);
  bool dup = channel_rng_.chance(config_.channel.p_dup);
  if (!lost) {
    schedule(now_ + config_.channel.delay.sample(channel_rng_),
             Event{.kind = Event::Kind::Deliver, .msg = m.id});
  }
  if (dup) {
    schedule(now_ + config_.channel.delay.sample(channel_rng_),
             Event{.kind = Event::Kind::Deliver, .msg = m.id});
  }
  if (m.type == Message::Type::Data) {
    schedule(now_ + config_.channel.ack_timeout,
             Event{.kind = Event::Kind::Timeout, .msg = m.id});
  }
}

TraceReport Engine::run_until_quiescent(SimTime max_time) {
  if (config_.faults.p_f > 0.0 && !epoch_roll_pending_) {
    epoch_roll_pending_ = true;
    schedule(config_.faults.epoch_length, Event{.kind = Event::Kind::EpochRoll});
  }
  bool timed_out = false;
  while (!queue_.empty()) {
    Event ev = queue_.top();
    if (ev.time > max_time) {
      timed_out = true;
      break;
    }
    queue_.pop();
    now_ = ev.time;
    trace_.update_u64(static_cast<std::uint64_t>(ev.time));
    trace_.update_u64(static_cast<std::uint64_t>(ev.kind));
    trace_.update_u64(ev.msg);
    trace_.update_u64(ev.node);
    dispatch(ev);
  }

  TraceReport report = stats_;
  report.quiescent = !timed_out;
  report.end_time = now_;
  report.pending_events = static_cast<std::int64_t>(queue_.size());
  report.unacked = 0;
  bool all_acked = true;
  for (const auto& [id, m] : msgs_) {
    if (m.type != Message::Type::Data) continue;
    if (!m.acked) {
      all_acked = false;
      report.unacked++;
    }
  }
  report.fairness_ok = report.quiescent && all_acked;
  report.trace_hash = trace_.digest();
  for (const auto& n : nodes_) {
    for (const auto& [target, state] : n->owned_targets()) {
      report.final_states[{n->id(), target}] = canonical_text(state);
    }
  }
  report.node_peak_bytes = ledger_.node_peaks();
  return report;
}

void Engine::dispatch(const Event& ev) {
  switch (ev.kind) {
    case Event::Kind::Deliver: return on_deliver(ev);
    case Event::Kind::Timeout: return on_timeout(ev.msg);
    case Event::Kind::Crash: return on_crash(ev.node);
    case Event::Kind::Recover: return on_recover(ev.node);
    case Event::Kind::TaskReady: return on_task_ready(ev);
    case Event::Kind::Scan: {
      Node& n = *nodes_.at(ev.node);
      n.scan_pending_ = false;
      if (n.alive() && scan_hook_) scan_hook_(*this, ev.node);
      return;
    }
    case Event::Kind::EpochRoll: return on_epoch_roll();
  }
}

void Engine::on_deliver(const Event& ev) {
  Message& m = msgs_.at(ev.msg);
  if (m.type == Message::Type::Ack) {
    stats_.acks++;
    auto it = msgs_.find(m.ref);
    if (it != msgs_.end()) it->second.acked = true;
    return;
  }
  if (m.type == Message::Type::Nack) {
    // Informational: the sender's timeout drives the retransmission.
    return;
  }
  if (m.delivered_once) stats_.duplicate_deliveries++;
  m.delivered_once = true;
  Node& n = *nodes_.at(m.dst);
  if (!n.alive()) {
    stats_.dropped_at_dead_node++;
    return;
  }
  stats_.delivered++;
  on_data(m);
}

void Engine::on_data(Message& m) {
  Node& n = *nodes_.at(m.dst);
  const Increment& inc = m.inc;
  const TargetId target = inc.meta.target;
  if (!n.hosts(target)) {
    throw RoutingError("node " + std::to_string(n.id()) +
                       " does not host target " + to_hex(target));
  }
  const auto pending_key = std::make_pair(target, inc.meta.rid);

  if (inc.meta.op != kOpMerge && n.seen(target, inc.meta.rid)) {
    send_ack(m);  // already consumed: state unchanged, re-ack
    return;
  }
  // The rid-off ablation removes every rid-keyed defense, including this
  // window filter: duplicate copies become indistinguishable new work.
  const bool rid_dedup = !(raw_add_ablation_ && inc.meta.op == kOpMerge);
  if (rid_dedup && n.pending_rids_.count(pending_key) != 0) {
    // A twin is already buffered; it will be acked when consumed and this
    // copy's retransmission will then hit the re-ack path.
    return;
  }
  if (inc.meta.op == kOpPairJoin) {
    auto half = decode_pair_half(std::get<std::string>(inc.payload));
    auto it = n.parked_.find({target, half.pair_key});
    if (it != n.parked_.end()) {
      // Completing a pair never grows the window, so it bypasses admission;
      // the arriving half is consumed in place, only the parked partner
      // leaves the window.
      PendingItem partner = it->second;
      n.parked_.erase(it);
      PendingItem arrived{inc, m.id, m.src};
      complete_pair(n, partner, arrived, /*b_in_window=*/false);
      return;
    }
  }
  if (n.cfg_.window_capacity && n.occupancy() >= *n.cfg_.window_capacity) {
    stats_.nacks++;
    send_nack(m);
    return;
  }
  admit(n, inc, m.id, m.src);
}

void Engine::admit(Node& n, const Increment& inc, MsgId msg, NodeId reply_to) {
  n.queue_.push_back(PendingItem{inc, msg, reply_to});
  n.pending_rids_.insert({inc.meta.target, inc.meta.rid});
  n.window_bytes_ += inc.size_bytes();
  note_buffer(n);
  if (n.cfg_.window_capacity && n.occupancy() > *n.cfg_.window_capacity) {
    stats_.occupancy_violations++;
  }
  if (!n.processing_) {
    n.processing_ = true;
    schedule(now_ + config_.task_latency.sample(latency_rng_),
             Event{.kind = Event::Kind::TaskReady,
                   .node = n.id(),
                   .token = n.busy_token_});
  }
}

void Engine::note_buffer(Node& n) {
  ledger_.record_buffer(n.id(), n.window_bytes_);
}

void Engine::on_task_ready(const Event& ev) {
  Node& n = *nodes_.at(ev.node);
  if (!n.alive() || ev.token != n.busy_token_) return;
  if (n.queue_.empty()) {
    n.processing_ = false;
    return;
  }
  PendingItem item = n.queue_.front();
  n.queue_.pop_front();
  process_item(n, item);
  if (!n.queue_.empty()) {
    schedule(now_ + config_.task_latency.sample(latency_rng_),
             Event{.kind = Event::Kind::TaskReady,
                   .node = n.id(),
                   .token = n.busy_token_});
  } else {
    n.processing_ = false;
  }
}

void Engine::process_item(Node& n, const PendingItem& item) {
  const Increment& inc = item.inc;
  const TargetId target = inc.meta.target;
  if (inc.meta.op == kOpMerge) {
    merge_into(n, inc);
    n.window_bytes_ -= inc.size_bytes();
    n.pending_rids_.erase({target, inc.meta.rid});
    send_ack(msgs_.at(item.msg));
    stats_.tasks_done++;
    ledger_.record_completion(now_);
    return;
  }
  if (inc.meta.op == kOpPairJoin) {
    auto half = decode_pair_half(std::get<std::string>(inc.payload));
    auto key = std::make_pair(target, half.pair_key);
    auto it = n.parked_.find(key);
    if (it != n.parked_.end()) {
      PendingItem partner = it->second;
      n.parked_.erase(it);
      complete_pair(n, partner, item);
    } else {
      n.parked_.emplace(key, item);  // still occupies the window, unacked
    }
    return;
  }
  // Single-input continuation op.
  n.window_bytes_ -= inc.size_bytes();
  n.pending_rids_.erase({target, inc.meta.rid});
  if (!n.seen(target, inc.meta.rid)) {
    auto outs = registry_->apply_op(
        inc.meta.op, std::get<std::string>(inc.payload), inc.meta.next);
    emit_outputs(n, outs);
    n.remember(target, inc.meta.rid);
    stats_.tasks_done++;
    ledger_.record_completion(now_);
  }
  send_ack(msgs_.at(item.msg));
}

void Engine::complete_pair(Node& n, const PendingItem& a, const PendingItem& b,
                           bool b_in_window) {
  auto ha = decode_pair_half(std::get<std::string>(a.inc.payload));
  const PendingItem& left = ha.side == 0 ? a : b;
  const PendingItem& right = ha.side == 0 ? b : a;
  const std::string combined =
      std::get<std::string>(left.inc.payload) +
      std::get<std::string>(right.inc.payload);
  auto outs =
      registry_->apply_op(kOpPairJoin, combined, left.inc.meta.next);
  emit_outputs(n, outs);
  for (const PendingItem* item : {&a, &b}) {
    const TargetId t = item->inc.meta.target;
    if (item != &b || b_in_window) {
      n.window_bytes_ -= item->inc.size_bytes();
      n.pending_rids_.erase({t, item->inc.meta.rid});
    }
    n.remember(t, item->inc.meta.rid);
    send_ack(msgs_.at(item->msg));
  }
  stats_.tasks_done++;
  ledger_.record_completion(now_);
}

void Engine::merge_into(Node& n, const Increment& inc) {
  const TargetId target = inc.meta.target;
  const auto* value = std::get_if<JoinValue>(&inc.payload);
  if (value == nullptr) {
    throw VariantMismatchError("merge increment without a lattice payload");
  }
  stats_.merges++;
  if (raw_add_ablation_) {
    if (const auto* sum = std::get_if<RidKeyedSum>(value)) {
      // Ablated merge: plain scalar addition, no rid dedup. Every delivered
      // copy counts, so duplication inflates the total.
      n.raw_totals_[target] += sum->total();
      return;
    }
  }
  JoinValue& state = n.owned_.at(target);
  JoinValue next = join(state, *value);
  bool changed = !(next == state);
  state = std::move(next);
  if (config_.record_trajectories) {
    trajectories_[{n.id(), target}].push_back(state);
  }
  if (changed && scan_hook_) request_scan(n.id());
}

void Engine::emit_outputs(Node& n, const std::vector<Increment>& outs) {
  for (const auto& out : outs) send_routed(n.id(), out);
}

void Engine::send_ack(const Message& data_msg) {
  send_control(Message::Type::Ack, data_msg.id, data_msg.dst, data_msg.src);
}

void Engine::send_nack(const Message& data_msg) {
  send_control(Message::Type::Nack, data_msg.id, data_msg.dst, data_msg.src);
}

void Engine::send_control(Message::Type type, MsgId ref, NodeId src, NodeId dst) {
  Message m;
  m.id = next_msg_++;
  m.src = src;
  m.dst = dst;
  m.type = type;
  m.ref = ref;
  m.bytes = 16;
  auto [it, _] = msgs_.emplace(m.id, std::move(m));
  transmit(it->second);
}

void Engine::on_timeout(MsgId id) {
  Message& m = msgs_.at(id);
  if (m.acked || m.gave_up) return;
  if (config_.channel.max_retries &&
      m.retries_used >= *config_.channel.max_retries) {
    m.gave_up = true;
    return;
  }
  m.retries_used++;
  stats_.retransmissions++;
  transmit(m);
}

void Engine::on_crash(NodeId id) {
  Node& n = *nodes_.at(id);
  if (!n.alive()) return;  // crash of an already-crashed node is a no-op
  n.alive_ = false;
  n.busy_token_++;
  n.processing_ = false;
  n.queue_.clear();
  n.parked_.clear();
  n.pending_rids_.clear();
  n.seen_.clear();
  n.seen_fifo_.clear();
  n.fired_rids_.clear();
  n.window_bytes_ = 0;
  stats_.crashes++;
  schedule(now_ + config_.faults.recovery_delay,
           Event{.kind = Event::Kind::Recover, .node = id});
}

void Engine::on_recover(NodeId id) {
  Node& n = *nodes_.at(id);
  n.alive_ = true;
  if (scan_hook_) request_scan(id);
}

void Engine::on_epoch_roll() {
  for (auto& n : nodes_) {
    if (!n->config().crashable) continue;
    bool crash = fault_rng_.chance(config_.faults.p_f);
    if (crash && n->alive()) {
      schedule(now_, Event{.kind = Event::Kind::Crash, .node = n->id()});
    }
  }
  // Keep rolling only while the run still has work; otherwise the engine
  // could never quiesce.
  if (!queue_.empty()) {
    schedule(now_ + config_.faults.epoch_length,
             Event{.kind = Event::Kind::EpochRoll});
  }
}

void Engine::request_scan(NodeId node) {
  Node& n = *nodes_.at(node);
  if (n.scan_pending_) return;
  n.scan_pending_ = true;
  schedule(now_ + 1, Event{.kind = Event::Kind::Scan, .node = node});
}

const std::vector<JoinValue>& Engine::trajectory(NodeId node,
                                                 TargetId target) const {
  static const std::vector<JoinValue> kEmpty;
  auto it = trajectories_.find({node, target});
  return it == trajectories_.end() ? kEmpty : it->second;
}

nlohmann::json Engine::node_snapshot(NodeId node) const {
  const Node& n = *nodes_.at(node);
  nlohmann::json targets = nlohmann::json::object();
  for (const auto& [target, state] : n.owned_targets()) {
    targets[to_hex(target)] = canonical_text(state);
  }
  return nlohmann::json{
      {"node", node},
      {"alive", n.alive()},
      {"occupancy", n.occupancy()},
      {"window_bytes", n.window_bytes()},
      {"targets", targets},
  };
}

}  // namespace sdpf
