#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sdpf/netsim.hpp"

using namespace sdpf;

namespace {

Increment merge_inc(TargetId target, JoinValue v, std::uint64_t rid_seed) {
  Increment inc;
  inc.meta.id = rid_seed;
  inc.meta.target = target;
  inc.meta.op = kOpMerge;
  inc.meta.next = kOpTerminal;
  inc.meta.rid = derive_rid(make_provenance({rid_seed}, kOpMerge, 0, 0));
  inc.payload = std::move(v);
  return inc;
}

EngineConfig clean_config() {
  EngineConfig cfg;
  cfg.channel.delay = DelayModel::constant(1);
  cfg.task_latency = DelayModel::constant(1);
  return cfg;
}

}  // namespace

TEST_CASE("pareto inverse CDF") {
  ParetoParams p{2.0, 1.0};
  CHECK(sample_pareto(p, 0.0) == doctest::Approx(1.0));
  CHECK(sample_pareto(p, 0.75) == doctest::Approx(2.0));
  ParetoParams scaled{1.5, 3.0};
  CHECK(sample_pareto(scaled, 0.0) == doctest::Approx(3.0));
}

TEST_CASE("pareto samples match the closed-form survival function") {
  ParetoParams p{2.0, 1.0};
  RngStream rng(99);
  const int n = 100000;
  int beyond4 = 0;
  for (int i = 0; i < n; ++i) {
    if (sample_pareto(p, rng.uniform01()) > 4.0) beyond4++;
  }
  double empirical = static_cast<double>(beyond4) / n;
  CHECK(empirical == doctest::Approx(1.0 / 16.0).epsilon(0.2));
}

TEST_CASE("no chaos: exactly one delivery per send") {
  Engine eng(clean_config(), 1);
  NodeId worker = eng.add_node();
  NodeId source = eng.add_source_node();
  (void)worker;
  eng.declare_target(1, MaxRegister{});
  eng.send_at(0, source, worker,
              merge_inc(1, MaxRegister{5}, 1));
  auto report = eng.run_until_quiescent(1'000'000);
  CHECK(report.quiescent);
  CHECK(report.delivered == 1);
  CHECK(report.duplicate_deliveries == 0);
  CHECK(report.retransmissions == 0);
  CHECK(report.fairness_ok);
}

TEST_CASE("forced duplication: two deliveries for one send") {
  auto cfg = clean_config();
  cfg.channel.p_dup = 1.0;
  Engine eng(cfg, 1);
  eng.add_node();
  NodeId source = eng.add_source_node();
  eng.declare_target(1, MaxRegister{});
  eng.send_at(0, source, owner_of(1, 1), merge_inc(1, MaxRegister{5}, 1));
  auto report = eng.run_until_quiescent(1'000'000);
  CHECK(report.quiescent);
  CHECK(report.delivered == 2);
  CHECK(report.duplicate_deliveries == 1);
  CHECK(report.final_states.at({owner_of(1, 1), 1}) == "max(5)");
}

TEST_CASE("heavy loss with unbounded retries still delivers everything") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto cfg = clean_config();
    cfg.channel.p_loss = 0.5;
    cfg.channel.ack_timeout = 16;
    Engine eng(cfg, seed);
    eng.add_node();
    NodeId source = eng.add_source_node();
    eng.declare_target(1, GrowSet{});
    std::vector<JoinValue> items;
    for (std::uint64_t i = 0; i < 100; ++i) {
      GrowSet s;
      s.elements.insert("e" + std::to_string(i));
      items.push_back(s);
      eng.send_at(0, source, owner_of(1, 1), merge_inc(1, s, i));
    }
    auto report = eng.run_until_quiescent(10'000'000);
    REQUIRE(report.quiescent);
    REQUIRE(report.fairness_ok);
    REQUIRE(report.final_states.at({owner_of(1, 1), 1}) ==
            canonical_text(join_all(items)));
  }
}

TEST_CASE("empty queue: immediate quiescence with zero counts") {
  Engine eng(clean_config(), 7);
  eng.add_node();
  auto report = eng.run_until_quiescent(1000);
  CHECK(report.quiescent);
  CHECK(report.delivered == 0);
  CHECK(report.sends == 0);
  CHECK(report.end_time == 0);
}

TEST_CASE("same seed gives bit-identical trace hash") {
  auto run = [](std::uint64_t seed) {
    auto cfg = clean_config();
    cfg.channel.p_loss = 0.2;
    cfg.channel.p_dup = 0.3;
    cfg.channel.delay = DelayModel::pareto({2.0, 1.0});
    Engine eng(cfg, seed);
    eng.add_node();
    eng.add_node();
    NodeId source = eng.add_source_node();
    eng.declare_target(1, MaxRegister{});
    eng.declare_target(2, MaxRegister{});
    for (std::uint64_t i = 0; i < 20; ++i) {
      TargetId t = 1 + (i % 2);
      eng.send_at(0, source, owner_of(t, 2),
                  merge_inc(t, MaxRegister{static_cast<std::int64_t>(i)}, i));
    }
    return eng.run_until_quiescent(1'000'000);
  };
  auto a = run(42);
  auto b = run(42);
  auto c = run(43);
  CHECK(a.trace_hash == b.trace_hash);
  CHECK(a.end_time == b.end_time);
  CHECK(a.final_states == b.final_states);
  CHECK(a.trace_hash != c.trace_hash);
}

TEST_CASE("chaos run converges to the join_all oracle") {
  auto cfg = clean_config();
  cfg.channel.p_loss = 0.1;
  cfg.channel.p_dup = 0.2;
  cfg.channel.delay = DelayModel::pareto({2.0, 1.0});
  cfg.channel.ack_timeout = 32;
  cfg.faults.p_f = 0.01;
  Engine eng(cfg, 1234);
  for (int i = 0; i < 3; ++i) eng.add_node();
  NodeId source = eng.add_source_node();
  for (TargetId t = 1; t <= 3; ++t) eng.declare_target(t, MaxRegister{});
  std::map<TargetId, std::vector<JoinValue>> oracle_in;
  RngStream values(77);
  for (std::uint64_t i = 0; i < 30; ++i) {
    TargetId t = 1 + (i % 3);
    JoinValue v = MaxRegister{static_cast<std::int64_t>(values.below(1000))};
    oracle_in[t].push_back(v);
    eng.send_at(0, source, owner_of(t, 3), merge_inc(t, v, i));
  }
  auto report = eng.run_until_quiescent(10'000'000);
  REQUIRE(report.quiescent);
  REQUIRE(report.fairness_ok);
  for (TargetId t = 1; t <= 3; ++t) {
    CHECK(report.final_states.at({owner_of(t, 3), t}) ==
          canonical_text(join_all(oracle_in[t])));
  }
}

TEST_CASE("p_f = 0 means zero crash events over any horizon") {
  auto cfg = clean_config();
  cfg.faults.p_f = 0.0;
  Engine eng(cfg, 5);
  eng.add_node();
  NodeId source = eng.add_source_node();
  eng.declare_target(1, MaxRegister{});
  for (std::uint64_t i = 0; i < 50; ++i) {
    eng.send_at(static_cast<SimTime>(i * 10), source, owner_of(1, 1),
                merge_inc(1, MaxRegister{static_cast<std::int64_t>(i)}, i));
  }
  auto report = eng.run_until_quiescent(1'000'000);
  CHECK(report.quiescent);
  CHECK(report.crashes == 0);
}

TEST_CASE("crash with empty buffer leaves durable state unchanged") {
  Engine eng(clean_config(), 3);
  NodeId worker = eng.add_node();
  NodeId source = eng.add_source_node();
  eng.declare_target(1, MaxRegister{});
  NodeId owner = owner_of(1, 1);
  REQUIRE(owner == worker);
  eng.send_at(0, source, owner, merge_inc(1, MaxRegister{9}, 1));
  eng.inject_crash(worker, 100);
  auto report = eng.run_until_quiescent(1'000'000);
  CHECK(report.quiescent);
  CHECK(report.crashes == 1);
  CHECK(report.final_states.at({owner, 1}) == "max(9)");
}

TEST_CASE("crash wipes the volatile window; retransmits merge exactly once") {
  auto run = [](bool with_crash) {
    auto cfg = clean_config();
    cfg.task_latency = DelayModel::constant(10);  // increments linger queued
    cfg.channel.ack_timeout = 25;
    Engine eng(cfg, 11);
    NodeId worker = eng.add_node();
    NodeId source = eng.add_source_node();
    eng.declare_target(1, GrowSet{});
    REQUIRE(owner_of(1, 1) == worker);
    for (std::uint64_t i = 0; i < 5; ++i) {
      GrowSet s;
      s.elements.insert(std::string(1, static_cast<char>('a' + i)));
      eng.send_at(0, source, worker, merge_inc(1, s, i));
    }
    if (with_crash) eng.inject_crash(worker, 5);
    return eng.run_until_quiescent(1'000'000);
  };
  auto crashed = run(true);
  auto baseline = run(false);
  REQUIRE(crashed.quiescent);
  REQUIRE(crashed.fairness_ok);
  CHECK(crashed.crashes == 1);
  CHECK(crashed.retransmissions > 0);
  CHECK(crashed.final_states.at({0, 1}) == baseline.final_states.at({0, 1}));
  CHECK(crashed.final_states.at({0, 1}) == "set{61,62,63,64,65}");
}

TEST_CASE("crash of an already-crashed node is a no-op") {
  Engine eng(clean_config(), 3);
  NodeId worker = eng.add_node();
  eng.inject_crash(worker, 10);
  eng.inject_crash(worker, 11);  // recovery_delay is 16: still down at 11
  auto report = eng.run_until_quiescent(1000);
  CHECK(report.crashes == 1);
}

TEST_CASE("misrouted increment raises a routing error") {
  Engine eng(clean_config(), 3);
  eng.add_node();
  eng.add_node();
  eng.declare_target(1, MaxRegister{});
  NodeId wrong = owner_of(1, 2) == 0 ? 1 : 0;
  eng.send_at(0, wrong, wrong, merge_inc(1, MaxRegister{1}, 1));
  CHECK_THROWS_AS(eng.run_until_quiescent(1000), RoutingError);
}

TEST_CASE("non-quiescence within the horizon is reported explicitly") {
  auto cfg = clean_config();
  cfg.channel.p_loss = 1.0;  // unfair channel: nothing ever arrives
  cfg.channel.ack_timeout = 8;
  Engine eng(cfg, 9);
  eng.add_node();
  NodeId source = eng.add_source_node();
  eng.declare_target(1, MaxRegister{});
  eng.send_at(0, source, owner_of(1, 1), merge_inc(1, MaxRegister{1}, 1));
  auto report = eng.run_until_quiescent(500);
  CHECK_FALSE(report.quiescent);
  CHECK(report.unacked == 1);
  CHECK(report.pending_events > 0);
  CHECK_FALSE(report.fairness_ok);
}

TEST_CASE("trace report serializes to JSON with config echo fields") {
  Engine eng(clean_config(), 21);
  eng.add_node();
  NodeId source = eng.add_source_node();
  eng.declare_target(1, MaxRegister{});
  eng.send_at(0, source, owner_of(1, 1), merge_inc(1, MaxRegister{3}, 1));
  auto report = eng.run_until_quiescent(1000);
  auto j = trace_to_json(report);
  CHECK(j["quiescent"] == true);
  CHECK(j["delivered"] == 1);
  CHECK(j["trace_hash"].get<std::string>().size() == 16);
  CHECK(j["final_states"].size() == 1);
}
