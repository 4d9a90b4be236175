#include "sdpf/sk.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>

#include "sdpf/rng.hpp"

namespace sdpf::sk {

ExprPtr s() {
  auto e = std::make_shared<ExprNode>();
  e->kind = ExprNode::Kind::S;
  return e;
}

ExprPtr k() {
  auto e = std::make_shared<ExprNode>();
  e->kind = ExprNode::Kind::K;
  return e;
}

ExprPtr var(std::string name) {
  auto e = std::make_shared<ExprNode>();
  e->kind = ExprNode::Kind::Var;
  e->name = std::move(name);
  return e;
}

ExprPtr app(ExprPtr left, ExprPtr right) {
  auto e = std::make_shared<ExprNode>();
  e->kind = ExprNode::Kind::App;
  e->left = std::move(left);
  e->right = std::move(right);
  return e;
}

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case ExprNode::Kind::S:
    case ExprNode::Kind::K:
      return true;
    case ExprNode::Kind::Var:
      return a->name == b->name;
    case ExprNode::Kind::App:
      return expr_equal(a->left, b->left) && expr_equal(a->right, b->right);
  }
  return false;
}

std::string print_expr(const ExprPtr& e) {
  switch (e->kind) {
    case ExprNode::Kind::S: return "S";
    case ExprNode::Kind::K: return "K";
    case ExprNode::Kind::Var: return e->name;
    case ExprNode::Kind::App: {
      std::string left = print_expr(e->left);
      std::string right = print_expr(e->right);
      if (e->right->kind == ExprNode::Kind::App) right = "(" + right + ")";
      return left + " " + right;
    }
  }
  return {};
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ExprPtr run() {
    ExprPtr e = expression();
    skip_space();
    if (pos_ != text_.size()) throw ParseError("trailing input", pos_);
    return e;
  }

 private:
  ExprPtr expression() {
    skip_space();
    ExprPtr acc;
    for (;;) {
      skip_space();
      if (pos_ >= text_.size() || text_[pos_] == ')') break;
      ExprPtr atom = parse_atom();
      acc = acc ? app(std::move(acc), std::move(atom)) : std::move(atom);
    }
    if (!acc) throw ParseError("empty expression", pos_);
    return acc;
  }

  ExprPtr parse_atom() {
    char c = text_[pos_];
    if (c == '(') {
      std::size_t open = pos_++;
      ExprPtr inner = expression();
      skip_space();
      if (pos_ >= text_.size() || text_[pos_] != ')') {
        throw ParseError("unbalanced parenthesis", open);
      }
      pos_++;
      return inner;
    }
    if (c == 'S') {
      pos_++;
      return s();
    }
    if (c == 'K') {
      pos_++;
      return k();
    }
    if (std::islower(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::islower(static_cast<unsigned char>(text_[pos_])) ||
              std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '_')) {
        pos_++;
      }
      return var(std::string(text_.substr(start, pos_ - start)));
    }
    throw ParseError(std::string("illegal token '") + c + "'", pos_);
  }

  void skip_space() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      pos_++;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

bool is_kind(const ExprPtr& e, ExprNode::Kind kind) {
  return e && e->kind == kind;
}

// Leftmost-outermost: the root first, then the function, then the argument.
std::optional<ExprPtr> oracle_step(const ExprPtr& e) {
  if (e->kind != ExprNode::Kind::App) return std::nullopt;
  const ExprPtr& f = e->left;
  if (is_kind(f, ExprNode::Kind::App) && is_kind(f->left, ExprNode::Kind::K)) {
    return f->right;  // K x y -> x
  }
  if (is_kind(f, ExprNode::Kind::App) && is_kind(f->left, ExprNode::Kind::App) &&
      is_kind(f->left->left, ExprNode::Kind::S)) {
    const ExprPtr& x = f->left->right;
    const ExprPtr& y = f->right;
    const ExprPtr& z = e->right;
    return app(app(x, z), app(y, z));  // S x y z -> x z (y z)
  }
  if (auto l = oracle_step(e->left)) return app(*l, e->right);
  if (auto r = oracle_step(e->right)) return app(e->left, *r);
  return std::nullopt;
}

}  // namespace

ExprPtr parse_expr(std::string_view text) { return Parser(text).run(); }

OracleResult reduce_oracle(ExprPtr e, int max_steps) {
  OracleResult out;
  out.expr = std::move(e);
  while (out.steps < max_steps) {
    auto next = oracle_step(out.expr);
    if (!next) {
      out.normal_form = true;
      return out;
    }
    out.expr = *next;
    out.steps++;
  }
  out.normal_form = !oracle_step(out.expr).has_value();
  return out;
}

// --- tiles ------------------------------------------------------------

std::string encode_tile(const TileData& t) {
  std::string out;
  out.push_back(static_cast<char>(t.kind));
  if (t.kind == ExprNode::Kind::Var) {
    out += t.name;
  } else if (t.kind == ExprNode::Kind::App) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(t.left >> (8 * i)));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(t.right >> (8 * i)));
  }
  return out;
}

TileData decode_tile(std::string_view payload) {
  if (payload.empty()) throw CodecError("empty tile payload");
  TileData t;
  t.kind = static_cast<ExprNode::Kind>(payload[0]);
  if (t.kind == ExprNode::Kind::Var) {
    t.name = std::string(payload.substr(1));
  } else if (t.kind == ExprNode::Kind::App) {
    if (payload.size() != 17) throw CodecError("malformed app tile");
    for (int i = 7; i >= 0; --i) {
      t.left = (t.left << 8) | static_cast<unsigned char>(payload[1 + i]);
      t.right = (t.right << 8) | static_cast<unsigned char>(payload[9 + i]);
    }
  }
  return t;
}

namespace {

Rid init_rid(TileId id) {
  return derive_rid(make_provenance({id}, kOpSkInit, 0, 0));
}

TileId content_id(const TileData& d) {
  Fnv64 h;
  h.update_u64(static_cast<std::uint64_t>(d.kind));
  h.update(d.name.data(), d.name.size());
  h.update_u64(d.left);
  h.update_u64(d.right);
  return mix64(h.digest());
}

TileId translate_go(const ExprPtr& e, TileStore& store, std::uint64_t& counter) {
  TileId id = counter++;
  TileData d;
  d.kind = e->kind;
  if (e->kind == ExprNode::Kind::Var) {
    d.name = e->name;
  } else if (e->kind == ExprNode::Kind::App) {
    d.left = translate_go(e->left, store, counter);
    d.right = translate_go(e->right, store, counter);
  }
  store.entries.emplace(id, TileCell::present(encode_tile(d), init_rid(id)));
  return id;
}

TileId collapsed_go(const ExprPtr& e, TileStore& store) {
  TileData d;
  d.kind = e->kind;
  if (e->kind == ExprNode::Kind::Var) {
    d.name = e->name;
  } else if (e->kind == ExprNode::Kind::App) {
    d.left = collapsed_go(e->left, store);
    d.right = collapsed_go(e->right, store);
  }
  TileId id = content_id(d);
  store.entries.emplace(id, TileCell::present(encode_tile(d), init_rid(id)));
  return id;
}

}  // namespace

Translation translate(const ExprPtr& e) {
  Translation t;
  std::uint64_t counter = 1;
  t.root = translate_go(e, t.store, counter);
  return t;
}

Translation translate_collapsed(const ExprPtr& e) {
  Translation t;
  t.root = collapsed_go(e, t.store);
  return t;
}

// --- readback ---------------------------------------------------------

namespace {

struct ResolvedTile {
  TileId id = 0;
  TileData data;
};

/// Follows tombstone forwards to the Present cell holding the tile's
/// current value. nullopt when the chain dangles, dead-ends, or cycles.
std::optional<ResolvedTile> resolve(const TileStore& view, TileId id) {
  std::size_t hops = 0;
  for (;;) {
    auto it = view.entries.find(id);
    if (it == view.entries.end()) return std::nullopt;
    if (it->second.state == TileCell::State::Present) {
      return ResolvedTile{id, decode_tile(it->second.payload)};
    }
    if (!it->second.forward) return std::nullopt;
    id = *it->second.forward;
    if (++hops > view.entries.size() + 1) return std::nullopt;
  }
}

class Readback {
 public:
  explicit Readback(const TileStore& store) : store_(store) {}

  ExprPtr walk(TileId raw) {
    TileId id = resolve_strict(raw);
    auto memo = memo_.find(id);
    if (memo != memo_.end()) return memo->second;
    if (!onstack_.insert(id).second) {
      throw IntegrityError("reference cycle through tile " + to_hex(id));
    }
    const TileData d = decode_tile(store_.entries.at(id).payload);
    ExprPtr e;
    switch (d.kind) {
      case ExprNode::Kind::S: e = s(); break;
      case ExprNode::Kind::K: e = k(); break;
      case ExprNode::Kind::Var: e = var(d.name); break;
      case ExprNode::Kind::App: e = app(walk(d.left), walk(d.right)); break;
    }
    onstack_.erase(id);
    memo_.emplace(id, e);
    return e;
  }

 private:
  TileId resolve_strict(TileId id) {
    std::size_t hops = 0;
    for (;;) {
      auto it = store_.entries.find(id);
      if (it == store_.entries.end()) {
        throw IntegrityError("dangling reference to tile " + to_hex(id));
      }
      if (it->second.state == TileCell::State::Present) return id;
      if (!it->second.forward) {
        throw IntegrityError("tombstoned tile without forward: " + to_hex(id));
      }
      id = *it->second.forward;
      if (++hops > store_.entries.size() + 1) {
        throw IntegrityError("forward cycle at tile " + to_hex(id));
      }
    }
  }

  const TileStore& store_;
  std::map<TileId, ExprPtr> memo_;
  std::set<TileId> onstack_;
};

}  // namespace

ExprPtr reconstruct(const TileStore& store, TileId root) {
  return Readback(store).walk(root);
}

IntegrityReport integrity_scan(const TileStore& store, TileId root) {
  IntegrityReport report;
  std::set<TileId> visited;
  std::set<TileId> onstack;
  std::function<void(TileId)> go = [&](TileId raw) {
    TileId id = raw;
    std::size_t hops = 0;
    for (;;) {
      auto it = store.entries.find(id);
      if (it == store.entries.end()) {
        report.problems.push_back("dangling reference to tile " + to_hex(id));
        return;
      }
      if (it->second.state == TileCell::State::Present) break;
      if (!it->second.forward) {
        report.problems.push_back("tombstoned tile without forward: " +
                                  to_hex(id));
        return;
      }
      id = *it->second.forward;
      if (++hops > store.entries.size() + 1) {
        report.problems.push_back("forward cycle at tile " + to_hex(id));
        return;
      }
    }
    if (!visited.insert(id).second) return;
    if (!onstack.insert(id).second) {
      report.problems.push_back("reference cycle through tile " + to_hex(id));
      return;
    }
    const TileData d = decode_tile(store.entries.at(id).payload);
    if (d.kind == ExprNode::Kind::App) {
      go(d.left);
      go(d.right);
    }
    onstack.erase(id);
  };
  go(root);
  report.ok = report.problems.empty();
  return report;
}

// --- rewriting ----------------------------------------------------------

std::optional<ReductionRequest> match_redex(const TileStore& view, TileId apex) {
  auto it = view.entries.find(apex);
  if (it == view.entries.end() ||
      it->second.state != TileCell::State::Present) {
    return std::nullopt;
  }
  const TileData d = decode_tile(it->second.payload);
  if (d.kind != ExprNode::Kind::App) return std::nullopt;
  auto t1 = resolve(view, d.left);
  if (!t1 || t1->data.kind != ExprNode::Kind::App) return std::nullopt;
  auto head = resolve(view, t1->data.left);
  if (!head) return std::nullopt;

  ReductionRequest req;
  req.apex = apex;
  if (head->data.kind == ExprNode::Kind::K) {
    req.rule = ReductionRequest::Rule::K;
    req.redex_ids = {apex, t1->id, head->id};
    req.args = {t1->data.right, d.right};
  } else if (head->data.kind == ExprNode::Kind::App) {
    auto leaf = resolve(view, head->data.left);
    if (!leaf || leaf->data.kind != ExprNode::Kind::S) return std::nullopt;
    req.rule = ReductionRequest::Rule::S;
    req.redex_ids = {apex, t1->id, head->id, leaf->id};
    req.args = {head->data.right, t1->data.right, d.right};
  } else {
    return std::nullopt;
  }
  req.rid = derive_rid(make_provenance(
      req.redex_ids, kOpSkCombine,
      static_cast<std::uint32_t>(req.rule), 0));
  return req;
}

std::vector<ReductionRequest> branch(const TileStore& view,
                                     const std::vector<TileId>& owned_apexes) {
  std::vector<ReductionRequest> out;
  for (TileId apex : owned_apexes) {
    if (auto req = match_redex(view, apex)) out.push_back(std::move(*req));
  }
  return out;
}

namespace {

TileId fresh_id(const Rid& rid, std::uint64_t k) {
  return mix64(rid.hi ^ mix64(rid.lo + k));
}

Increment tile_increment(TileId id, TileCell cell, const Rid& rid,
                         TargetId target) {
  Increment inc;
  inc.meta.id = id;
  inc.meta.target = target;
  inc.meta.op = kOpMerge;
  inc.meta.next = kOpTerminal;
  inc.meta.rid = rid;
  TileStore single;
  single.entries.emplace(id, std::move(cell));
  inc.payload = JoinValue{std::move(single)};
  return inc;
}

/// All Present tile ids reachable from raw, following forwards and App
/// children. Used by the deep-copy mode to enumerate the consumed subtree.
void reachable_present(const TileStore& view, TileId raw,
                       std::set<TileId>& out) {
  auto r = resolve(view, raw);
  if (!r) return;
  if (!out.insert(r->id).second) return;
  if (r->data.kind == ExprNode::Kind::App) {
    reachable_present(view, r->data.left, out);
    reachable_present(view, r->data.right, out);
  }
}

class DeepCopier {
 public:
  DeepCopier(const TileStore& view, const CombineOptions& opts, const Rid& rid)
      : view_(view), opts_(opts), rid_(rid) {}

  TileId copy(TileId raw) {
    auto r = resolve(view_, raw);
    if (!r) throw IntegrityError("deep copy across a dangling tile");
    TileData d = r->data;
    if (d.kind == ExprNode::Kind::App) {
      d.left = copy(d.left);
      d.right = copy(d.right);
    }
    return mint(d);
  }

  TileId mint(const TileData& d) {
    TileId id = opts_.collapsed_ids ? content_id(d) : fresh_id(rid_, counter_++);
    cells.emplace_back(id, TileCell::present(encode_tile(d), rid_));
    return id;
  }

  std::vector<std::pair<TileId, TileCell>> cells;

 private:
  const TileStore& view_;
  const CombineOptions& opts_;
  Rid rid_;
  std::uint64_t counter_ = 16;  // 0..15 reserved for spine tiles
};

}  // namespace

std::vector<Increment> combine(const ReductionRequest& req,
                               const TileStore& view,
                               const CombineOptions& opts) {
  const std::size_t want_args =
      req.rule == ReductionRequest::Rule::K ? 2 : 3;
  if (req.args.size() != want_args) {
    throw ArityError("reduction request arity mismatch");
  }
  // Stale-request rule: the redex must still match exactly as requested;
  // a tombstoned apex or a drifted spine emits nothing.
  auto current = match_redex(view, req.apex);
  if (!current || current->rid != req.rid) return {};

  std::vector<Increment> out;
  if (opts.mode == CombineMode::Indirection) {
    if (req.rule == ReductionRequest::Rule::K) {
      out.push_back(tile_increment(
          req.apex, TileCell::tombstone(req.rid, req.args[0]), req.rid,
          opts.store_target));
    } else {
      const TileId x = req.args[0], y = req.args[1], z = req.args[2];
      const TileId n1 = fresh_id(req.rid, 0);
      const TileId n2 = fresh_id(req.rid, 1);
      const TileId n0 = fresh_id(req.rid, 2);
      // Copy realized as shared reference: both new apps point at the same z.
      out.push_back(tile_increment(
          n1, TileCell::present(encode_tile({ExprNode::Kind::App, {}, x, z}),
                                req.rid),
          req.rid, opts.store_target));
      out.push_back(tile_increment(
          n2, TileCell::present(encode_tile({ExprNode::Kind::App, {}, y, z}),
                                req.rid),
          req.rid, opts.store_target));
      out.push_back(tile_increment(
          n0, TileCell::present(encode_tile({ExprNode::Kind::App, {}, n1, n2}),
                                req.rid),
          req.rid, opts.store_target));
      out.push_back(tile_increment(
          req.apex, TileCell::tombstone(req.rid, n0), req.rid,
          opts.store_target));
    }
    return out;
  }

  // Deep copy: fresh tiles for the whole contractum, tombstones for the
  // whole consumed redex subtree. An argument subtree that has not fully
  // arrived in this view yet defers the rewrite until a later scan.
  DeepCopier copier(view, opts, req.rid);
  TileId contractum_root = 0;
  try {
    if (req.rule == ReductionRequest::Rule::K) {
      contractum_root = copier.copy(req.args[0]);
    } else {
      const TileId xc = copier.copy(req.args[0]);
      const TileId z1 = copier.copy(req.args[2]);
      const TileId yc = copier.copy(req.args[1]);
      const TileId z2 = copier.copy(req.args[2]);
      const TileId n1 = copier.mint({ExprNode::Kind::App, {}, xc, z1});
      const TileId n2 = copier.mint({ExprNode::Kind::App, {}, yc, z2});
      contractum_root = copier.mint({ExprNode::Kind::App, {}, n1, n2});
    }
  } catch (const IntegrityError&) {
    return {};
  }
  std::set<TileId> consumed;
  reachable_present(view, req.apex, consumed);
  for (auto& [id, cell] : copier.cells) {
    out.push_back(tile_increment(id, std::move(cell), req.rid,
                                 opts.store_target));
  }
  for (TileId id : consumed) {
    if (id == req.apex) continue;
    out.push_back(tile_increment(id, TileCell::tombstone(req.rid), req.rid,
                                 opts.store_target));
  }
  out.push_back(tile_increment(req.apex,
                               TileCell::tombstone(req.rid, contractum_root),
                               req.rid, opts.store_target));
  return out;
}

ClosureResult closure_reduce(const Translation& phi, int max_fires,
                             const CombineOptions& opts) {
  ClosureResult out;
  out.store = phi.store;
  std::set<Rid> fired;
  for (;;) {
    bool progress = false;
    // Snapshot the ids: firing mutates the store.
    std::vector<TileId> apexes;
    for (const auto& [id, cell] : out.store.entries) apexes.push_back(id);
    for (TileId apex : apexes) {
      auto req = match_redex(out.store, apex);
      if (!req || fired.count(req->rid) != 0) continue;
      if (out.fired >= max_fires) return out;  // complete stays false
      auto incs = combine(*req, out.store, opts);
      fired.insert(req->rid);
      if (incs.empty()) continue;
      out.fired++;
      progress = true;
      for (const auto& inc : incs) {
        JoinValue current = out.store;
        out.store =
            std::get<TileStore>(join(current, std::get<JoinValue>(inc.payload)));
      }
    }
    if (!progress) break;
  }
  out.complete = true;
  return out;
}

// --- distributed execution ------------------------------------------------

DistributedResult run_distributed(const ExprPtr& expr,
                                  const DistributedOptions& opts) {
  Translation phi =
      opts.collapsed_ids ? translate_collapsed(expr) : translate(expr);

  EngineConfig cfg;
  cfg.channel = opts.channel;
  cfg.faults = opts.faults;
  cfg.task_latency = DelayModel::constant(1);
  Engine eng(cfg, opts.seed);
  for (std::size_t i = 0; i < opts.nodes; ++i) eng.add_node();
  NodeId source = eng.add_source_node();
  eng.set_registry(std::make_shared<OpRegistry>(standard_registry()));
  eng.declare_replicated_target(kSkStoreTarget, TileStore{});

  CombineOptions copts;
  copts.mode = opts.mode;
  copts.collapsed_ids = opts.collapsed_ids;

  int fired_total = 0;
  bool budget_hit = false;
  const std::size_t workers = opts.nodes;
  eng.set_scan_hook([&, copts](Engine& e, NodeId node) {
    if (budget_hit) return;
    Node& n = e.node_at(node);
    const auto& view = std::get<TileStore>(n.state_of(kSkStoreTarget));
    std::vector<TileId> owned;
    for (const auto& [id, cell] : view.entries) {
      if (owner_of(id, workers) == node) owned.push_back(id);
    }
    for (const auto& req : branch(view, owned)) {
      if (n.fired_rids().count(req.rid) != 0) continue;
      if (fired_total >= opts.step_budget) {
        budget_hit = true;
        return;
      }
      auto incs = combine(req, view, copts);
      // An empty emission here means an incomplete view (deep-copy mode
      // waiting for in-flight tiles); leave the rid unfired so a later
      // scan retries.
      if (incs.empty()) continue;
      n.fired_rids().insert(req.rid);
      fired_total++;
      for (const auto& inc : incs) {
        for (std::size_t dst = 0; dst < workers; ++dst) {
          for (int d = 0; d < opts.dup_factor; ++d) {
            e.send(node, static_cast<NodeId>(dst), inc);
          }
        }
      }
    }
  });

  for (const auto& [id, cell] : phi.store.entries) {
    Increment inc = tile_increment(id, cell, cell.rid, kSkStoreTarget);
    eng.ledger().add_input_bytes(inc.payload_bytes());
    eng.ledger().add_source_bytes(inc.payload_bytes());
    for (std::size_t dst = 0; dst < workers; ++dst) {
      eng.send_at(0, source, static_cast<NodeId>(dst), inc);
    }
  }

  DistributedResult result;
  result.trace = eng.run_until_quiescent(opts.max_time);
  result.fired_rewrites = fired_total;

  const auto& replica0 = std::get<TileStore>(
      eng.node_at(0).state_of(kSkStoreTarget));
  result.store_text = canonical_text(JoinValue{replica0});
  result.replicas_agree = true;
  for (std::size_t i = 1; i < workers; ++i) {
    const auto& r = std::get<TileStore>(
        eng.node_at(static_cast<NodeId>(i)).state_of(kSkStoreTarget));
    if (canonical_text(JoinValue{r}) != result.store_text) {
      result.replicas_agree = false;
    }
  }

  if (!result.trace.quiescent) {
    result.status = DistributedResult::Status::Timeout;
    std::int64_t pending_redexes = 0;
    for (const auto& [id, cell] : replica0.entries) {
      if (match_redex(replica0, id)) pending_redexes++;
    }
    result.problem = "non-quiescent: " + std::to_string(result.trace.unacked) +
                     " unacked, " + std::to_string(pending_redexes) +
                     " pending redexes";
    return result;
  }
  if (budget_hit) {
    result.status = DistributedResult::Status::StepLimit;
    result.problem = "step budget exhausted";
    return result;
  }
  try {
    result.expr = reconstruct(replica0, phi.root);
    result.expr_text = print_expr(result.expr);
    result.status = DistributedResult::Status::NormalForm;
  } catch (const IntegrityError& err) {
    result.status = DistributedResult::Status::Corrupt;
    result.problem = err.what();
  }
  return result;
}

namespace {

ExprPtr random_expr(RngStream& rng, int depth) {
  if (depth > 0 && rng.chance(0.5)) {
    return app(random_expr(rng, depth - 1), random_expr(rng, depth - 1));
  }
  switch (rng.below(4)) {
    case 0: return s();
    case 1: return k();
    default:
      return var(std::string(1, static_cast<char>('a' + rng.below(4))));
  }
}

}  // namespace

std::vector<ExprPtr> normalizing_corpus(int count, std::uint64_t seed,
                                        int max_depth, int oracle_budget,
                                        int closure_budget) {
  RngStream rng(seed);
  std::vector<ExprPtr> corpus;
  std::set<std::string> seen;
  while (static_cast<int>(corpus.size()) < count) {
    ExprPtr e = random_expr(rng, max_depth);
    auto oracle = reduce_oracle(e, oracle_budget);
    if (!oracle.normal_form || oracle.steps < 1) continue;
    Translation phi = translate(e);
    auto closure = closure_reduce(phi, closure_budget);
    if (!closure.complete) continue;
    // SK is confluent: a complete closure must read back to the oracle's
    // normal form. A mismatch is a rewrite bug, not a rejection.
    if (!expr_equal(reconstruct(closure.store, phi.root), oracle.expr)) {
      throw IntegrityError("closure disagrees with the oracle on: " +
                           print_expr(e));
    }
    std::string text = print_expr(e);
    if (!seen.insert(text).second) continue;
    corpus.push_back(std::move(e));
  }
  return corpus;
}

}  // namespace sdpf::sk
