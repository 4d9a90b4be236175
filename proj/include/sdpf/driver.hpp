#ifndef SDPF_DRIVER_HPP_
#define SDPF_DRIVER_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sdpf/flow.hpp"
#include "sdpf/ids.hpp"
#include "sdpf/lattice.hpp"
#include "sdpf/netsim.hpp"

namespace sdpf {

/// Independent merge tasks, spread over targets by ownership hashing.
struct RandomIncrements {
  enum class Variant { Max, Set, Sum };
  int count = 50;
  Variant variant = Variant::Sum;
  int n_targets = 3;
  std::int64_t value_range = 1000;
};

/// n source tiles, each consumed by u consumers that contribute to one
/// aggregate output. single_read switches S1 on (one source read per tile,
/// then in-network replication) or off (every consumer fetches from the
/// source).
struct BroadcastAggregate {
  int n_tiles = 4;
  int consumers_per_tile = 3;
  std::int64_t tile_size = 10;
  bool single_read = true;
};

/// n left/right pairs combined elementwise into one aggregate. The arrival
/// order is the memory-experiment knob: left-then-right forces hoarding,
/// interleaved admits a constant window. The first burst_pairs pairs arrive
/// at t=0 (pinning the window peak); the rest are paced one increment per
/// spacing units.
struct StreamPair {
  enum class Order { Interleaved, LeftThenRight };
  int n_pairs = 100;
  Order order = Order::Interleaved;
  int burst_pairs = 16;
  SimTime spacing = 1;
};

struct SkReduce {
  std::string expr;
};

struct Workload {
  std::variant<RandomIncrements, BroadcastAggregate, StreamPair, SkReduce> kind;
  std::uint64_t seed = 0;
};

struct Injection {
  SimTime at = 0;
  Increment inc;
};

struct GeneratedWorkload {
  std::vector<Injection> injections;
  /// Target declarations (bottom per target).
  std::map<TargetId, JoinValue> targets;
  /// Expected final state per accumulator target (the oracle).
  std::map<TargetId, JoinValue> oracle;
  std::int64_t input_bytes = 0;
  std::int64_t output_bytes = 0;
  /// Bytes read across the slow-storage boundary at injection time: equals
  /// input_bytes for single-read workloads, more when consumers multi-fetch.
  std::int64_t source_read_bytes = 0;
  std::vector<std::int64_t> tile_sizes;          // BroadcastAggregate
  std::vector<std::int64_t> consumption_counts;  // BroadcastAggregate
  std::string sk_oracle;                         // SkReduce
};

/// Deterministic from the workload seed. The oracle is computed by direct
/// sequential evaluation (join_all or the sequential reducer).
GeneratedWorkload gen_workload(const Workload& w);

struct ThroughputReport {
  int node_count = 0;
  std::int64_t tasks_done = 0;
  SimTime makespan = 0;
  double throughput = 0.0;
  std::vector<SimTime> round_max;  // BSP only
  bool oracle_match = false;
  std::uint64_t seed = 0;
};

struct AsyncOptions {
  DelayModel task_latency = DelayModel::constant(1);
  SimTime max_time = 500'000'000;
  std::optional<std::size_t> window_capacity;
  bool record_trajectories = false;
  bool raw_add_ablation = false;
  /// Chaos seed override: defaults to the workload seed. Lets one increment
  /// multiset run under different delivery orders.
  std::optional<std::uint64_t> engine_seed;
};

struct AsyncResult {
  ThroughputReport throughput;
  TraceReport trace;
  bool trajectories_monotone = true;
  nlohmann::json ledger;
  std::int64_t w_max = 0;
  double r_a = 0.0;
  /// Final states in canonical text per accumulator target.
  std::map<TargetId, std::string> final_states;
  /// Raw scalar totals per target (rid-off ablation runs).
  std::map<TargetId, std::int64_t> raw_totals;
};

/// Barrier-less execution: P workers, every delivered task is processed as
/// soon as the node is free; no cross-node wait points.
AsyncResult run_async(const Workload& w, std::size_t node_count,
                      const ChannelConfig& channel, const FaultConfig& faults,
                      const AsyncOptions& opts = {});

/// Barrier-synchronized foil: each round ends at the max of P i.i.d. task
/// latencies; the barrier is modeled analytically at task granularity.
ThroughputReport run_bsp(std::size_t node_count, int rounds,
                         const DelayModel& latency, std::uint64_t seed);

struct SlopeFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares on (log x, log y). Requires >= 3 distinct x and
/// positive values.
SlopeFit fit_scaling_exponent(
    const std::vector<std::pair<double, double>>& points);

}  // namespace sdpf

#endif  // SDPF_DRIVER_HPP_
