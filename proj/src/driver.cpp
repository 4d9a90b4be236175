#include "sdpf/driver.hpp"

#include <algorithm>
#include <cmath>

#include "sdpf/node.hpp"
#include "sdpf/rng.hpp"
#include "sdpf/sk.hpp"

namespace sdpf {

namespace {

constexpr TargetId kRandTargetBase = 0x1000;
constexpr TargetId kTaskTargetBase = 0x2000;
constexpr TargetId kPairTargetBase = 0x100000;
constexpr TargetId kOutMax = 0xA11;
constexpr TargetId kOutSum = 0xB11;

Increment merge_increment(TargetId target, JoinValue v, const Rid& rid,
                          TileId id) {
  Increment inc;
  inc.meta.id = id;
  inc.meta.target = target;
  inc.meta.op = kOpMerge;
  inc.meta.next = kOpTerminal;
  inc.meta.rid = rid;
  inc.payload = std::move(v);
  return inc;
}

void gen_random_increments(const RandomIncrements& spec, std::uint64_t seed,
                           GeneratedWorkload& out) {
  RngStream rng = RngStream::derive(seed, "workload");
  std::map<TargetId, std::vector<JoinValue>> per_target;
  for (int i = 0; i < spec.count; ++i) {
    TargetId target = kRandTargetBase + static_cast<TargetId>(i % spec.n_targets);
    Rid rid = derive_rid(make_provenance({static_cast<TileId>(i)}, kOpMerge, 0, 0));
    JoinValue v;
    switch (spec.variant) {
      case RandomIncrements::Variant::Max:
        v = MaxRegister{static_cast<std::int64_t>(
            rng.below(static_cast<std::uint64_t>(spec.value_range)))};
        break;
      case RandomIncrements::Variant::Set: {
        GrowSet s;
        s.elements.insert("e" + std::to_string(rng.below(64)));
        v = s;
        break;
      }
      case RandomIncrements::Variant::Sum: {
        RidKeyedSum s;
        s.entries.emplace(rid, 1);  // unit contributions
        v = s;
        break;
      }
    }
    per_target[target].push_back(v);
    Increment inc = merge_increment(target, v, rid, static_cast<TileId>(i));
    out.input_bytes += inc.payload_bytes();
    out.injections.push_back({0, std::move(inc)});
  }
  for (const auto& [target, values] : per_target) {
    switch (spec.variant) {
      case RandomIncrements::Variant::Max:
        out.targets[target] = MaxRegister{};
        break;
      case RandomIncrements::Variant::Set:
        out.targets[target] = GrowSet{};
        break;
      case RandomIncrements::Variant::Sum:
        out.targets[target] = RidKeyedSum{};
        break;
    }
    out.oracle[target] = join_all(values);
    out.output_bytes += Increment{{}, out.oracle[target]}.payload_bytes();
  }
  out.source_read_bytes = out.input_bytes;
}

void gen_broadcast_aggregate(const BroadcastAggregate& spec, std::uint64_t seed,
                             GeneratedWorkload& out) {
  RngStream rng = RngStream::derive(seed, "workload");
  out.targets[kOutMax] = MaxRegister{};
  std::int64_t best = std::numeric_limits<std::int64_t>::min();
  for (int k = 0; k < spec.n_tiles; ++k) {
    std::vector<std::int64_t> values;
    for (std::int64_t b = 0; b < spec.tile_size; ++b) {
      values.push_back(static_cast<std::int64_t>(rng.below(256)));
      best = std::max(best, values.back());
    }
    out.tile_sizes.push_back(spec.tile_size);
    out.consumption_counts.push_back(spec.consumers_per_tile);
    out.input_bytes += spec.tile_size;
    MaxExtractPayload payload;
    payload.source_tile = 0x9000 + static_cast<TileId>(k);
    payload.out_target = kOutMax;
    payload.values = values;
    for (int j = 0; j < spec.consumers_per_tile; ++j) {
      TargetId task = kTaskTargetBase +
                      static_cast<TargetId>(k * spec.consumers_per_tile + j);
      out.targets[task] = MaxRegister{};
      Increment inc;
      inc.meta.id = task;
      inc.meta.target = task;
      inc.meta.op = kOpMaxExtract;
      inc.meta.next = kOpMerge;
      inc.meta.rid = derive_rid(make_provenance(
          {payload.source_tile}, kOpMaxExtract, 1,
          static_cast<std::uint32_t>(j)));
      inc.payload = encode_max_extract(payload);
      out.injections.push_back({0, std::move(inc)});
    }
  }
  out.oracle[kOutMax] = MaxRegister{best};
  out.output_bytes = 8;  // one max register
  out.source_read_bytes =
      spec.single_read
          ? out.input_bytes
          : out.input_bytes * spec.consumers_per_tile;
}

void gen_stream_pair(const StreamPair& spec, std::uint64_t seed,
                     GeneratedWorkload& out) {
  RngStream rng = RngStream::derive(seed, "workload");
  out.targets[kOutSum] = RidKeyedSum{};
  RidKeyedSum oracle;
  std::vector<std::pair<PairHalfPayload, Rid>> halves;
  halves.reserve(static_cast<std::size_t>(spec.n_pairs) * 2);
  std::vector<std::pair<std::int64_t, std::int64_t>> values;
  for (int i = 0; i < spec.n_pairs; ++i) {
    std::int64_t l = static_cast<std::int64_t>(rng.below(1000));
    std::int64_t r = static_cast<std::int64_t>(rng.below(1000));
    values.emplace_back(l, r);
    Rid combined = derive_rid(
        make_provenance({static_cast<TileId>(i)}, kOpPairJoin, 0, 0));
    oracle.entries.emplace(combined, l + r);
    out.targets[kPairTargetBase + static_cast<TargetId>(i)] = MaxRegister{};
  }
  auto push_half = [&](int i, std::uint8_t side) {
    PairHalfPayload half;
    half.pair_key = static_cast<std::uint64_t>(i);
    half.side = side;
    half.value = side == 0 ? values[static_cast<std::size_t>(i)].first
                           : values[static_cast<std::size_t>(i)].second;
    half.out_target = kOutSum;
    Rid rid = derive_rid(make_provenance({static_cast<TileId>(i)},
                                         kOpPairJoin, 1, side));
    halves.emplace_back(half, rid);
  };
  if (spec.order == StreamPair::Order::Interleaved) {
    for (int i = 0; i < spec.n_pairs; ++i) {
      push_half(i, 0);
      push_half(i, 1);
    }
  } else {
    for (int i = 0; i < spec.n_pairs; ++i) push_half(i, 0);
    for (int i = 0; i < spec.n_pairs; ++i) push_half(i, 1);
  }
  const std::size_t burst =
      std::min(halves.size(), static_cast<std::size_t>(spec.burst_pairs) * 2);
  for (std::size_t j = 0; j < halves.size(); ++j) {
    const auto& [half, rid] = halves[j];
    Increment inc;
    inc.meta.id = (static_cast<TileId>(half.pair_key) << 1) | half.side;
    inc.meta.target = kPairTargetBase + static_cast<TargetId>(half.pair_key);
    inc.meta.op = kOpPairJoin;
    inc.meta.next = kOpMerge;
    inc.meta.rid = rid;
    inc.payload = encode_pair_half(half);
    out.input_bytes += inc.payload_bytes();
    SimTime at = j < burst
                     ? 0
                     : static_cast<SimTime>(j - burst + 1) * spec.spacing;
    out.injections.push_back({at, std::move(inc)});
  }
  out.oracle[kOutSum] = oracle;
  out.output_bytes = Increment{{}, JoinValue{oracle}}.payload_bytes();
  out.source_read_bytes = out.input_bytes;
}

}  // namespace

GeneratedWorkload gen_workload(const Workload& w) {
  GeneratedWorkload out;
  if (const auto* r = std::get_if<RandomIncrements>(&w.kind)) {
    gen_random_increments(*r, w.seed, out);
  } else if (const auto* b = std::get_if<BroadcastAggregate>(&w.kind)) {
    gen_broadcast_aggregate(*b, w.seed, out);
  } else if (const auto* s = std::get_if<StreamPair>(&w.kind)) {
    gen_stream_pair(*s, w.seed, out);
  } else {
    const auto& sk_spec = std::get<SkReduce>(w.kind);
    auto oracle = sk::reduce_oracle(sk::parse_expr(sk_spec.expr), 1000);
    out.sk_oracle = sk::print_expr(oracle.expr);
  }
  return out;
}

AsyncResult run_async(const Workload& w, std::size_t node_count,
                      const ChannelConfig& channel, const FaultConfig& faults,
                      const AsyncOptions& opts) {
  GeneratedWorkload gw = gen_workload(w);
  EngineConfig cfg;
  cfg.channel = channel;
  cfg.faults = faults;
  cfg.task_latency = opts.task_latency;
  cfg.record_trajectories = opts.record_trajectories;
  Engine eng(cfg, opts.engine_seed.value_or(w.seed));
  for (std::size_t i = 0; i < node_count; ++i) {
    eng.add_node({.window_capacity = opts.window_capacity});
  }
  NodeId source = eng.add_source_node();
  eng.set_registry(std::make_shared<OpRegistry>(standard_registry()));
  eng.set_raw_add_ablation(opts.raw_add_ablation);
  for (const auto& [target, bottom] : gw.targets) {
    eng.declare_target(target, bottom);
  }
  eng.ledger().add_input_bytes(gw.input_bytes);
  eng.ledger().add_source_bytes(gw.source_read_bytes);
  for (const auto& inj : gw.injections) {
    for (NodeId dst : eng.destinations(inj.inc.meta.target)) {
      eng.send_at(inj.at, source, dst, inj.inc);
    }
  }

  AsyncResult result;
  result.trace = eng.run_until_quiescent(opts.max_time);
  if (result.trace.quiescent) {
    // Output write-back across the storage boundary.
    eng.ledger().add_output_bytes(gw.output_bytes);
    eng.ledger().add_source_bytes(gw.output_bytes);
  }

  result.throughput.node_count = static_cast<int>(node_count);
  result.throughput.seed = w.seed;
  result.throughput.tasks_done = result.trace.tasks_done;
  result.throughput.makespan = eng.ledger().completions().empty()
                                   ? 0
                                   : eng.ledger().completions().back();
  result.throughput.throughput =
      result.throughput.makespan > 0
          ? static_cast<double>(result.throughput.tasks_done) /
                static_cast<double>(result.throughput.makespan)
          : 0.0;

  if (opts.record_trajectories) {
    for (const auto& [target, bottom] : gw.targets) {
      NodeId owner = owner_of(target, node_count);
      const auto& traj = eng.trajectory(owner, target);
      for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        if (!leq(traj[i], traj[i + 1])) result.trajectories_monotone = false;
      }
    }
  }

  bool all_match = result.trace.quiescent;
  for (const auto& [target, expected] : gw.oracle) {
    NodeId owner = owner_of(target, node_count);
    auto it = result.trace.final_states.find({owner, target});
    std::string got = it == result.trace.final_states.end() ? "" : it->second;
    result.final_states[target] = got;
    if (opts.raw_add_ablation) {
      result.raw_totals[target] = eng.node_at(owner).raw_total(target);
    } else if (got != canonical_text(expected)) {
      all_match = false;
    }
  }
  result.throughput.oracle_match = all_match && !opts.raw_add_ablation;
  result.ledger = ledger_summary(eng.ledger());
  if (!eng.ledger().node_peaks().empty()) {
    result.w_max = peak_memory(eng.ledger());
  }
  if (eng.ledger().io_total() > 0) {
    result.r_a = amplification(eng.ledger());
  }
  return result;
}

ThroughputReport run_bsp(std::size_t node_count, int rounds,
                         const DelayModel& latency, std::uint64_t seed) {
  RngStream lat = RngStream::derive(seed, "latency");
  ThroughputReport report;
  report.node_count = static_cast<int>(node_count);
  report.seed = seed;
  report.oracle_match = true;
  for (int r = 0; r < rounds; ++r) {
    SimTime round_time = 0;
    for (std::size_t p = 0; p < node_count; ++p) {
      round_time = std::max(round_time, latency.sample(lat));
    }
    report.round_max.push_back(round_time);
    report.makespan += round_time;
  }
  report.tasks_done = static_cast<std::int64_t>(rounds) *
                      static_cast<std::int64_t>(node_count);
  report.throughput = report.makespan > 0
                          ? static_cast<double>(report.tasks_done) /
                                static_cast<double>(report.makespan)
                          : 0.0;
  return report;
}

SlopeFit fit_scaling_exponent(
    const std::vector<std::pair<double, double>>& points) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [x, y] : points) {
    if (x <= 0.0 || y <= 0.0) {
      throw FitError("fit requires positive coordinates");
    }
    xs.push_back(std::log(x));
    ys.push_back(std::log(y));
  }
  std::vector<double> distinct = xs;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) {
    throw FitError("fit requires at least 3 distinct x values");
  }
  const std::size_t n = xs.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  SlopeFit fit;
  fit.points = n;
  fit.slope = sxy / sxx;
  double intercept = my - fit.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double resid = ys[i] - (intercept + fit.slope * xs[i]);
    rss += resid * resid;
  }
  if (n > 2) {
    fit.stderr_ = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

}  // namespace sdpf
