#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sdpf/rng.hpp"
#include "sdpf/sk.hpp"

using namespace sdpf;
using namespace sdpf::sk;

namespace {

ChannelConfig chaos_channel() {
  ChannelConfig c;
  c.p_loss = 0.1;
  c.p_dup = 0.3;
  c.delay = DelayModel::pareto({2.0, 1.0});
  c.ack_timeout = 64;
  return c;
}

std::string oracle_text(const std::string& expr) {
  auto r = reduce_oracle(parse_expr(expr), 1000);
  REQUIRE(r.normal_form);
  return print_expr(r.expr);
}

}  // namespace

TEST_CASE("parse leaves and left association") {
  CHECK(print_expr(parse_expr("K")) == "K");
  ExprPtr e = parse_expr("S x y z");
  // ((S x) y) z
  REQUIRE(e->kind == ExprNode::Kind::App);
  CHECK(e->right->name == "z");
  CHECK(e->left->right->name == "y");
  CHECK(e->left->left->right->name == "x");
  CHECK(e->left->left->left->kind == ExprNode::Kind::S);
  CHECK(print_expr(e) == "S x y z");
}

TEST_CASE("parse duplicate subtrees as distinct structurally equal nodes") {
  ExprPtr e = parse_expr("(f x) (f x)");
  REQUIRE(e->kind == ExprNode::Kind::App);
  CHECK(expr_equal(e->left, e->right));
  CHECK(e->left != e->right);  // distinct trees, not shared
  CHECK(print_expr(e) == "f x (f x)");
  CHECK(expr_equal(parse_expr(print_expr(e)), e));
}

TEST_CASE("parse errors carry positions") {
  CHECK_THROWS_AS(parse_expr(""), ParseError);
  CHECK_THROWS_AS(parse_expr("   "), ParseError);
  CHECK_THROWS_AS(parse_expr("(K a"), ParseError);
  CHECK_THROWS_AS(parse_expr("K a)"), ParseError);
  CHECK_THROWS_AS(parse_expr("K A"), ParseError);
  try {
    parse_expr("K %");
  } catch (const ParseError& e) {
    CHECK(e.position() == 2);
  }
}

TEST_CASE("print/parse round-trip on random expressions") {
  RngStream rng(31);
  auto corpus = normalizing_corpus(50, 17, 8, 200, 400);
  for (const auto& e : corpus) {
    CHECK(expr_equal(parse_expr(print_expr(e)), e));
  }
}

TEST_CASE("oracle: K rule") { CHECK(oracle_text("K a b") == "a"); }

TEST_CASE("oracle: S rule") { CHECK(oracle_text("S x y z") == "x z (y z)"); }

TEST_CASE("oracle: S K K a reduces to a in two steps") {
  auto r = reduce_oracle(parse_expr("S K K a"), 100);
  REQUIRE(r.normal_form);
  CHECK(print_expr(r.expr) == "a");
  CHECK(r.steps == 2);
}

TEST_CASE("oracle: divergence surfaces as a step limit") {
  // (S I I)(S I I) with I = S K K reduces forever.
  const std::string omega = "S (S K K) (S K K)";
  auto r = reduce_oracle(parse_expr(omega + " (" + omega + ")"), 200);
  CHECK_FALSE(r.normal_form);
  CHECK(r.steps == 200);
}

TEST_CASE("translate: one tile per node, duplicates get distinct ids") {
  CHECK(translate(parse_expr("K")).store.entries.size() == 1);
  auto phi = translate(parse_expr("(f x) (f x)"));
  CHECK(phi.store.entries.size() == 7);
  CHECK(expr_equal(reconstruct(phi.store, phi.root), parse_expr("(f x)(f x)")));
}

TEST_CASE("translate_collapsed shares structurally equal subtrees") {
  auto phi = translate_collapsed(parse_expr("(f x) (f x)"));
  // f, x, (f x), apex: the duplicate subtree collapses to one id.
  CHECK(phi.store.entries.size() == 4);
  CHECK(expr_equal(reconstruct(phi.store, phi.root), parse_expr("(f x)(f x)")));
}

TEST_CASE("translate round-trips over random expressions") {
  auto corpus = normalizing_corpus(100, 99, 8, 200, 400);
  for (const auto& e : corpus) {
    auto phi = translate(e);
    REQUIRE(expr_equal(reconstruct(phi.store, phi.root), e));
    REQUIRE(integrity_scan(phi.store, phi.root).ok);
  }
}

TEST_CASE("branch finds the K redex in K a b") {
  auto phi = translate(parse_expr("K a b"));
  std::vector<TileId> all;
  for (const auto& [id, cell] : phi.store.entries) all.push_back(id);
  auto reqs = branch(phi.store, all);
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].rule == ReductionRequest::Rule::K);
  CHECK(reqs[0].apex == phi.root);
  CHECK(reqs[0].redex_ids.size() == 3);  // apex, inner app, K leaf
  CHECK(reqs[0].args.size() == 2);
}

TEST_CASE("branch emits nothing without a combinator head") {
  auto phi = translate(parse_expr("x y"));
  std::vector<TileId> all;
  for (const auto& [id, cell] : phi.store.entries) all.push_back(id);
  CHECK(branch(phi.store, all).empty());
}

TEST_CASE("branch is deterministic across invocations") {
  auto phi = translate(parse_expr("S K K (K a b)"));
  std::vector<TileId> all;
  for (const auto& [id, cell] : phi.store.entries) all.push_back(id);
  auto a = branch(phi.store, all);
  auto b = branch(phi.store, all);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].rid == b[i].rid);
    CHECK(a[i].apex == b[i].apex);
  }
}

TEST_CASE("combine K rule: forwarded tombstone splices the kept argument") {
  auto phi = translate(parse_expr("K a b"));
  auto req = match_redex(phi.store, phi.root);
  REQUIRE(req.has_value());
  auto incs = combine(*req, phi.store, {});
  REQUIRE(incs.size() == 1);
  JoinValue merged = phi.store;
  for (const auto& inc : incs) {
    merged = join(merged, std::get<JoinValue>(inc.payload));
  }
  const auto& store = std::get<TileStore>(merged);
  const auto& apex = store.entries.at(phi.root);
  CHECK(apex.state == TileCell::State::Tombstone);
  CHECK(apex.forward.has_value());
  CHECK(expr_equal(reconstruct(store, phi.root), var("a")));
}

TEST_CASE("combine S rule: contractum shares z by reference") {
  auto phi = translate(parse_expr("S x y z"));
  auto req = match_redex(phi.store, phi.root);
  REQUIRE(req.has_value());
  REQUIRE(req->rule == ReductionRequest::Rule::S);
  auto incs = combine(*req, phi.store, {});
  REQUIRE(incs.size() == 4);  // n1, n2, n0, apex tombstone
  JoinValue merged = phi.store;
  for (const auto& inc : incs) {
    merged = join(merged, std::get<JoinValue>(inc.payload));
  }
  const auto& store = std::get<TileStore>(merged);
  CHECK(print_expr(reconstruct(store, phi.root)) == "x z (y z)");
  // Both new apps must reference the same z tile.
  const auto n1 = decode_tile(
      std::get<JoinValue>(incs[0].payload).index() == 3
          ? std::get<TileStore>(std::get<JoinValue>(incs[0].payload)).entries.begin()->second.payload
          : "");
  const auto n2 = decode_tile(
      std::get<TileStore>(std::get<JoinValue>(incs[1].payload)).entries.begin()->second.payload);
  CHECK(n1.right == n2.right);
}

TEST_CASE("combine applied twice leaves the store bit-identical") {
  auto phi = translate(parse_expr("S K K a"));
  auto req = match_redex(phi.store, phi.root);
  REQUIRE(req.has_value());
  auto incs = combine(*req, phi.store, {});
  JoinValue once = phi.store;
  for (const auto& inc : incs) once = join(once, std::get<JoinValue>(inc.payload));
  JoinValue twice = once;
  for (const auto& inc : incs) twice = join(twice, std::get<JoinValue>(inc.payload));
  CHECK(canonical_text(once) == canonical_text(twice));
}

TEST_CASE("stale requests emit nothing") {
  auto phi = translate(parse_expr("K a b"));
  auto req = match_redex(phi.store, phi.root);
  REQUIRE(req.has_value());
  // Fire once and merge; the request is now stale.
  auto incs = combine(*req, phi.store, {});
  JoinValue merged = phi.store;
  for (const auto& inc : incs) merged = join(merged, std::get<JoinValue>(inc.payload));
  auto again = combine(*req, std::get<TileStore>(merged), {});
  CHECK(again.empty());
}

TEST_CASE("corrupted request arity raises a typed error") {
  auto phi = translate(parse_expr("K a b"));
  auto req = match_redex(phi.store, phi.root);
  REQUIRE(req.has_value());
  req->args.pop_back();
  CHECK_THROWS_AS(combine(*req, phi.store, {}), ArityError);
}

TEST_CASE("reconstruct reports dangling references and dead tombstones") {
  TileStore store;
  store.entries.emplace(
      1, TileCell::present(encode_tile({ExprNode::Kind::App, {}, 2, 3}), Rid{}));
  store.entries.emplace(2, TileCell::present(encode_tile({ExprNode::Kind::K, {}, 0, 0}), Rid{}));
  CHECK_THROWS_AS(reconstruct(store, 1), IntegrityError);  // 3 missing
  store.entries.emplace(3, TileCell::tombstone(Rid{}));
  CHECK_THROWS_AS(reconstruct(store, 1), IntegrityError);  // dead tombstone
  auto scan = integrity_scan(store, 1);
  CHECK_FALSE(scan.ok);
  REQUIRE(scan.problems.size() == 1);
}

TEST_CASE("closure reducer agrees with the oracle across a corpus") {
  auto corpus = normalizing_corpus(40, 5, 8, 200, 400);
  for (const auto& e : corpus) {
    auto phi = translate(e);
    auto closure = closure_reduce(phi, 400);
    REQUIRE(closure.complete);
    auto oracle = reduce_oracle(e, 400);
    REQUIRE(oracle.normal_form);
    REQUIRE(expr_equal(reconstruct(closure.store, phi.root), oracle.expr));
    REQUIRE(integrity_scan(closure.store, phi.root).ok);
  }
}

TEST_CASE("deep-copy mode with unique ids is also oracle-exact") {
  auto corpus = normalizing_corpus(15, 6, 6, 120, 300);
  CombineOptions deep;
  deep.mode = CombineMode::DeepCopy;
  for (const auto& e : corpus) {
    auto phi = translate(e);
    auto closure = closure_reduce(phi, 2000, deep);
    if (!closure.complete) continue;  // deep copies can re-expose work
    auto oracle = reduce_oracle(e, 400);
    REQUIRE(oracle.normal_form);
    REQUIRE(expr_equal(reconstruct(closure.store, phi.root), oracle.expr));
  }
}

TEST_CASE("distributed: K a b over chaos, 50 seeds") {
  ExprPtr e = parse_expr("K a b");
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    DistributedOptions opts;
    opts.nodes = 3;
    opts.channel = chaos_channel();
    opts.seed = seed;
    auto result = run_distributed(e, opts);
    REQUIRE(result.status == DistributedResult::Status::NormalForm);
    REQUIRE(result.expr_text == "a");
    REQUIRE(result.replicas_agree);
    REQUIRE(result.trace.fairness_ok);
  }
}

TEST_CASE("distributed: S K K a normalizes to a under chaos") {
  ExprPtr e = parse_expr("S K K a");
  DistributedOptions opts;
  opts.nodes = 4;
  opts.channel = chaos_channel();
  opts.seed = 7;
  auto result = run_distributed(e, opts);
  REQUIRE(result.status == DistributedResult::Status::NormalForm);
  CHECK(result.expr_text == "a");
}

TEST_CASE("distributed: spine shared with a surviving branch is preserved") {
  // S (S x) y (K u): the (K u) subtree is both consumed as a redex spine
  // and survives inside the normal form. Regression for shared-spine
  // tombstoning.
  ExprPtr e = parse_expr("S (S x) y (K u)");
  auto oracle = reduce_oracle(e, 100);
  REQUIRE(oracle.normal_form);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DistributedOptions opts;
    opts.nodes = 3;
    opts.channel = chaos_channel();
    opts.seed = seed;
    auto result = run_distributed(e, opts);
    REQUIRE(result.status == DistributedResult::Status::NormalForm);
    REQUIRE(expr_equal(result.expr, oracle.expr));
  }
}

TEST_CASE("distributed corpus: oracle agreement across seeds") {
  auto corpus = normalizing_corpus(10, 21, 8, 200, 400);
  for (const auto& e : corpus) {
    auto oracle = reduce_oracle(e, 400);
    REQUIRE(oracle.normal_form);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      DistributedOptions opts;
      opts.nodes = 4;
      opts.channel = chaos_channel();
      opts.seed = seed;
      auto result = run_distributed(e, opts);
      CAPTURE(print_expr(e));
      REQUIRE(result.status == DistributedResult::Status::NormalForm);
      REQUIRE(expr_equal(result.expr, oracle.expr));
      REQUIRE(result.replicas_agree);
    }
  }
}

TEST_CASE("distributed: duplicating combine increments leaves the store bit-identical") {
  ExprPtr e = parse_expr("S K K (K a b)");
  for (int dup : {1, 3}) {
    (void)dup;
  }
  DistributedOptions base;
  base.nodes = 3;
  base.channel = chaos_channel();
  base.seed = 11;
  auto once = run_distributed(e, base);
  DistributedOptions tripled = base;
  tripled.dup_factor = 3;
  auto thrice = run_distributed(e, tripled);
  REQUIRE(once.status == DistributedResult::Status::NormalForm);
  REQUIRE(thrice.status == DistributedResult::Status::NormalForm);
  CHECK(once.store_text == thrice.store_text);
  CHECK(once.expr_text == thrice.expr_text);
}

TEST_CASE("distributed: crash and recovery still reach the oracle") {
  ExprPtr e = parse_expr("S K K a");
  DistributedOptions opts;
  opts.nodes = 3;
  opts.channel = chaos_channel();
  opts.faults.p_f = 0.02;
  opts.faults.recovery_delay = 8;
  opts.faults.epoch_length = 16;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    opts.seed = seed;
    auto result = run_distributed(e, opts);
    REQUIRE(result.status == DistributedResult::Status::NormalForm);
    REQUIRE(result.expr_text == "a");
  }
}

TEST_CASE("id ablation: collapsed ids under copy semantics corrupt duplicate-subtree programs") {
  // One copy of t is consumed by a K redex while its twin survives; with
  // collapsed ids the consumed tiles are the surviving tiles.
  for (const char* text : {"(K w (f x)) (f x)", "(K w (g y z)) (g y z)"}) {
    ExprPtr e = parse_expr(text);
    auto oracle = reduce_oracle(e, 100);
    REQUIRE(oracle.normal_form);
    DistributedOptions opts;
    opts.nodes = 3;
    opts.seed = 4;
    opts.mode = CombineMode::DeepCopy;
    opts.collapsed_ids = true;
    auto result = run_distributed(e, opts);
    bool corrupt = result.status == DistributedResult::Status::Corrupt;
    bool wrong = result.status == DistributedResult::Status::NormalForm &&
                 !expr_equal(result.expr, oracle.expr);
    CAPTURE(text);
    CHECK((corrupt || wrong));
  }
}

TEST_CASE("unique ids keep the same programs exact under copy semantics") {
  for (const char* text : {"(K w (f x)) (f x)", "(K w (g y z)) (g y z)"}) {
    ExprPtr e = parse_expr(text);
    auto oracle = reduce_oracle(e, 100);
    DistributedOptions opts;
    opts.nodes = 3;
    opts.seed = 4;
    opts.mode = CombineMode::DeepCopy;
    auto result = run_distributed(e, opts);
    REQUIRE(result.status == DistributedResult::Status::NormalForm);
    CHECK(expr_equal(result.expr, oracle.expr));
  }
}
