#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sdpf/driver.hpp"
#include "sdpf/rng.hpp"

using namespace sdpf;

namespace {

ChannelConfig local_channel() {
  ChannelConfig c;
  c.delay = DelayModel::constant(0);
  c.ack_timeout = 1'000'000;
  return c;
}

Workload random_tasks(int count, std::uint64_t seed) {
  RandomIncrements spec;
  spec.count = count;
  spec.variant = RandomIncrements::Variant::Max;
  spec.n_targets = count;  // one target per task: embarrassingly parallel
  return Workload{spec, seed};
}

}  // namespace

TEST_CASE("gen_workload: random increments oracle is the running max") {
  RandomIncrements spec;
  spec.count = 5;
  spec.variant = RandomIncrements::Variant::Max;
  spec.n_targets = 1;
  auto gw = gen_workload({spec, 3});
  REQUIRE(gw.injections.size() == 5);
  REQUIRE(gw.oracle.size() == 1);
  std::int64_t best = std::numeric_limits<std::int64_t>::min();
  for (const auto& inj : gw.injections) {
    best = std::max(best,
                    std::get<MaxRegister>(std::get<JoinValue>(inj.inc.payload)).value);
  }
  CHECK(std::get<MaxRegister>(gw.oracle.begin()->second).value == best);
}

TEST_CASE("gen_workload: broadcast aggregate arithmetic") {
  BroadcastAggregate spec;
  spec.n_tiles = 4;
  spec.consumers_per_tile = 3;
  spec.tile_size = 10;
  auto gw = gen_workload({spec, 1});
  CHECK(gw.input_bytes == 40);
  CHECK(gw.output_bytes == 8);
  CHECK(gw.injections.size() == 12);  // consumption events
  CHECK(gw.source_read_bytes == 40);  // single read
  spec.single_read = false;
  auto multi = gen_workload({spec, 1});
  CHECK(multi.source_read_bytes == 120);
}

TEST_CASE("gen_workload: sk reduce oracle via the sequential reducer") {
  auto gw = gen_workload({SkReduce{"S K K a"}, 0});
  CHECK(gw.sk_oracle == "a");
}

TEST_CASE("gen_workload is deterministic from the seed") {
  auto a = gen_workload(random_tasks(20, 9));
  auto b = gen_workload(random_tasks(20, 9));
  REQUIRE(a.injections.size() == b.injections.size());
  for (std::size_t i = 0; i < a.injections.size(); ++i) {
    CHECK(encode_increment(a.injections[i].inc) ==
          encode_increment(b.injections[i].inc));
  }
}

TEST_CASE("async serial baseline: 10 unit-latency tasks take 10 units") {
  auto result = run_async(random_tasks(10, 5), 1, local_channel(), {});
  REQUIRE(result.trace.quiescent);
  CHECK(result.throughput.tasks_done == 10);
  CHECK(result.throughput.makespan == 10);
  CHECK(result.throughput.throughput == doctest::Approx(1.0));
  CHECK(result.throughput.oracle_match);
}

TEST_CASE("async speedup at P=8 on embarrassingly parallel work") {
  const int tasks = 2000;
  auto p1 = run_async(random_tasks(tasks, 5), 1, local_channel(), {});
  auto p8 = run_async(random_tasks(tasks, 5), 8, local_channel(), {});
  REQUIRE(p1.trace.quiescent);
  REQUIRE(p8.trace.quiescent);
  CHECK(p8.throughput.oracle_match);
  double speedup = p8.throughput.throughput / p1.throughput.throughput;
  CHECK(speedup >= 6.0);
}

TEST_CASE("bsp equals async at P=1 on the same latency stream") {
  const int rounds = 200;
  DelayModel pareto = DelayModel::pareto({2.0, 1.0});
  auto bsp = run_bsp(1, rounds, pareto, 77);
  AsyncOptions opts;
  opts.task_latency = pareto;
  auto async = run_async(random_tasks(rounds, 77), 1, local_channel(), {}, opts);
  REQUIRE(async.trace.quiescent);
  CHECK(bsp.makespan == async.throughput.makespan);
  CHECK(bsp.tasks_done == async.throughput.tasks_done);
}

TEST_CASE("bsp with constant latency: makespan is exactly rounds * c") {
  auto report = run_bsp(16, 50, DelayModel::constant(3), 1);
  CHECK(report.makespan == 150);
  for (SimTime t : report.round_max) CHECK(t == 3);
}

TEST_CASE("bsp round time is the max of that round's samples") {
  // Reproduce the engine's draw order with the same derived stream.
  const std::size_t P = 4;
  RngStream lat = RngStream::derive(123, "latency");
  DelayModel pareto = DelayModel::pareto({2.0, 1.0});
  std::vector<SimTime> expected;
  for (int r = 0; r < 10; ++r) {
    SimTime mx = 0;
    for (std::size_t p = 0; p < P; ++p) mx = std::max(mx, pareto.sample(lat));
    expected.push_back(mx);
  }
  auto report = run_bsp(P, 10, pareto, 123);
  CHECK(report.round_max == expected);
}

TEST_CASE("fit_scaling_exponent recovers exact slopes") {
  std::vector<std::pair<double, double>> linear, sqrt_pts;
  for (double p : {2.0, 4.0, 8.0, 16.0, 32.0}) {
    linear.emplace_back(p, p);
    sqrt_pts.emplace_back(p, std::sqrt(p));
  }
  CHECK(fit_scaling_exponent(linear).slope == doctest::Approx(1.0));
  CHECK(fit_scaling_exponent(sqrt_pts).slope == doctest::Approx(0.5));
}

TEST_CASE("fit_scaling_exponent recovers a noisy synthetic exponent") {
  RngStream rng(55);
  double total = 0;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<std::pair<double, double>> pts;
    for (double p : {2.0, 4.0, 8.0, 16.0, 32.0}) {
      double noise = 1.0 + 0.2 * (rng.uniform01() - 0.5);
      pts.emplace_back(p, std::pow(p, 0.7) * noise);
    }
    total += fit_scaling_exponent(pts).slope;
  }
  CHECK(total / reps == doctest::Approx(0.7).epsilon(0.07));
}

TEST_CASE("fit_scaling_exponent rejects bad input") {
  CHECK_THROWS_AS(fit_scaling_exponent({{2, 1}, {4, 2}}), FitError);
  CHECK_THROWS_AS(fit_scaling_exponent({{2, 1}, {4, 2}, {4, 3}}), FitError);
  CHECK_THROWS_AS(fit_scaling_exponent({{2, 1}, {4, -2}, {8, 3}}), FitError);
}

TEST_CASE("async and bsp drivers produce a sane pareto scaling contrast") {
  // Small smoke version of the scale experiment; the acceptance suite runs
  // the full sweep.
  DelayModel pareto = DelayModel::pareto({2.0, 1.0});
  std::vector<std::pair<double, double>> bsp_points;
  for (std::size_t p : {2u, 8u, 32u}) {
    double tput = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      tput += run_bsp(p, 100, pareto, seed).throughput;
    }
    bsp_points.emplace_back(static_cast<double>(p), tput / 3);
  }
  auto fit = fit_scaling_exponent(bsp_points);
  CHECK(fit.slope > 0.2);
  CHECK(fit.slope < 0.8);
}

TEST_CASE("stream pair: both arrival orders produce the same oracle output") {
  StreamPair spec;
  spec.n_pairs = 50;
  spec.order = StreamPair::Order::Interleaved;
  auto a = run_async({spec, 4}, 2, local_channel(), {});
  spec.order = StreamPair::Order::LeftThenRight;
  auto b = run_async({spec, 4}, 2, local_channel(), {});
  REQUIRE(a.trace.quiescent);
  REQUIRE(b.trace.quiescent);
  CHECK(a.throughput.oracle_match);
  CHECK(b.throughput.oracle_match);
  CHECK(a.final_states == b.final_states);
}

TEST_CASE("stream pair: hoarding peaks scale with n, sliding window stays flat") {
  auto peak_for = [](StreamPair::Order order, int n,
                     std::optional<std::size_t> cap) {
    StreamPair spec;
    spec.n_pairs = n;
    spec.order = order;
    spec.burst_pairs = 16;
    AsyncOptions opts;
    opts.window_capacity = cap;
    ChannelConfig chan = local_channel();
    chan.ack_timeout = 512;
    auto result = run_async({spec, 7}, 2, chan, {}, opts);
    REQUIRE(result.trace.quiescent);
    REQUIRE(result.throughput.oracle_match);
    REQUIRE(result.trace.occupancy_violations == 0);
    return result.w_max;
  };
  std::int64_t hoard_small = peak_for(StreamPair::Order::LeftThenRight, 100, {});
  std::int64_t hoard_big = peak_for(StreamPair::Order::LeftThenRight, 1000, {});
  CHECK(hoard_big >= 8 * hoard_small);  // roughly linear growth
  std::int64_t window_small =
      peak_for(StreamPair::Order::Interleaved, 100, std::size_t{8});
  std::int64_t window_big =
      peak_for(StreamPair::Order::Interleaved, 1000, std::size_t{8});
  CHECK(window_small == window_big);  // constant, independent of n
  Increment probe;
  probe.payload = std::string(kPairHalfBytes, 'x');
  CHECK(window_small == 8 * probe.size_bytes());
}

TEST_CASE("broadcast aggregate: single-read R_A is exactly 1") {
  BroadcastAggregate spec;
  spec.n_tiles = 4;
  spec.consumers_per_tile = 3;
  spec.tile_size = 10;
  auto result = run_async({spec, 2}, 2, local_channel(), {});
  REQUIRE(result.trace.quiescent);
  REQUIRE(result.throughput.oracle_match);
  CHECK(result.ledger["q_source"] == 48);
  CHECK(result.ledger["io_total"] == 48);
  CHECK(result.r_a == 1.0);
}

TEST_CASE("broadcast aggregate: multi-fetch R_A meets the analytic bound") {
  BroadcastAggregate spec;
  spec.n_tiles = 4;
  spec.consumers_per_tile = 3;
  spec.tile_size = 10;
  spec.single_read = false;
  auto result = run_async({spec, 2}, 2, local_channel(), {});
  REQUIRE(result.trace.quiescent);
  auto gw = gen_workload({spec, 0});
  double bound = prop51_bound(gw.tile_sizes, gw.consumption_counts,
                              gw.input_bytes + gw.output_bytes);
  CHECK(bound == doctest::Approx(1.0 + 80.0 / 48.0));
  CHECK(result.r_a >= bound - 1e-9);
}
