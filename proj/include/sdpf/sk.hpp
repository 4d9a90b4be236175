#ifndef SDPF_SK_HPP_
#define SDPF_SK_HPP_

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdpf/flow.hpp"
#include "sdpf/ids.hpp"
#include "sdpf/lattice.hpp"
#include "sdpf/netsim.hpp"

namespace sdpf::sk {

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  enum class Kind : std::uint8_t { S, K, Var, App };
  Kind kind = Kind::S;
  std::string name;  // Var
  ExprPtr left;      // App
  ExprPtr right;     // App
};

ExprPtr s();
ExprPtr k();
ExprPtr var(std::string name);
ExprPtr app(ExprPtr left, ExprPtr right);

bool expr_equal(const ExprPtr& a, const ExprPtr& b);

/// Minimal-parentheses form; application is left-associative, so
/// "S x y z" prints back as "S x y z".
std::string print_expr(const ExprPtr& e);

/// Grammar: S | K | lowercase identifiers | parentheses | juxtaposition
/// (left-associative). parse(print(e)) == e.
ExprPtr parse_expr(std::string_view text);

struct OracleResult {
  bool normal_form = false;  // false = step limit hit
  ExprPtr expr;
  int steps = 0;
};

/// Leftmost-outermost reduction of Kxy -> x and Sxyz -> xz(yz) until no
/// redex remains or max_steps is exhausted.
OracleResult reduce_oracle(ExprPtr e, int max_steps);

// --- tile representation ------------------------------------------------

/// Decoded tile payload.
struct TileData {
  ExprNode::Kind kind = ExprNode::Kind::S;
  std::string name;    // Var
  TileId left = 0;     // App
  TileId right = 0;    // App
};

std::string encode_tile(const TileData& t);
TileData decode_tile(std::string_view payload);

struct Translation {
  TileStore store;
  TileId root = 0;
};

/// Phi: one tile per expression node with fresh sequential ids; duplicate
/// subtrees get distinct ids. reconstruct(translate(e)) == e.
Translation translate(const ExprPtr& e);

/// Id ablation: structurally equal subtrees share one content-hashed id.
Translation translate_collapsed(const ExprPtr& e);

/// Readback of a quiescent store: follows tombstone forwards from the root
/// through Present cells. Throws IntegrityError on dangling references,
/// unforwarded tombstones on a live path, or reference cycles.
ExprPtr reconstruct(const TileStore& store, TileId root);

struct IntegrityReport {
  bool ok = true;
  std::vector<std::string> problems;
};

/// Walks everything reachable from the root and reports dangling ids,
/// dead-end tombstones, and cycles without throwing.
IntegrityReport integrity_scan(const TileStore& store, TileId root);

// --- rewriting ------------------------------------------------------------

inline constexpr OpCode kOpSkInit = 99;     // rid provenance for Phi tiles
inline constexpr OpCode kOpSkCombine = 100; // rid provenance for rewrites
inline constexpr TargetId kSkStoreTarget = 0xEEull;

struct ReductionRequest {
  enum class Rule : std::uint8_t { K = 0, S = 1 } rule = Rule::K;
  Rid rid;
  TileId apex = 0;
  std::vector<TileId> redex_ids;  // apex, inner spine apps, combinator leaf
  std::vector<TileId> args;       // x, y for K; x, y, z for S (raw ids)
};

/// Local pattern matching over a (possibly stale) replica view: emits one
/// request per owned, non-tombstoned apex whose resolved spine matches a K
/// or S redex. Deterministic: duplicate invocation emits identical requests.
std::vector<ReductionRequest> branch(const TileStore& view,
                                     const std::vector<TileId>& owned_apexes);

/// Pattern match at one apex.
std::optional<ReductionRequest> match_redex(const TileStore& view, TileId apex);

enum class CombineMode {
  /// The S rule shares z by reference and splices via a forwarded tombstone
  /// at the apex only; inner spine tiles stay put so a spine shared with a
  /// surviving branch is never destroyed.
  Indirection,
  /// Literal copy semantics: the contractum is a fresh deep copy and every
  /// tile of the consumed redex subtree is tombstoned. Sound while tiles are
  /// unshared; the id ablation runs in this mode.
  DeepCopy,
};

struct CombineOptions {
  CombineMode mode = CombineMode::Indirection;
  bool collapsed_ids = false;  // mint content-hashed ids for fresh tiles
  TargetId store_target = kSkStoreTarget;
};

/// Emits the rewrite transaction for a request, all increments tagged with
/// the request rid. A stale request (redex no longer fully present) emits
/// nothing. Throws ArityError on a rule/arity mismatch.
std::vector<Increment> combine(const ReductionRequest& req,
                               const TileStore& view,
                               const CombineOptions& opts);

struct ClosureResult {
  TileStore store;
  int fired = 0;
  bool complete = false;  // false: fire budget exhausted
};

/// Sequential reference for the distributed engine: repeatedly fires every
/// matchable redex (each rid once) until the store is closed. The closure is
/// confluent and timing-independent, so a fair distributed run converges to
/// exactly this store. Terms whose closure diverges (a discarded argument
/// that keeps rewriting) exhaust the budget instead.
ClosureResult closure_reduce(const Translation& phi, int max_fires,
                             const CombineOptions& opts = {});

// --- distributed execution -------------------------------------------------

struct DistributedOptions {
  std::size_t nodes = 4;
  ChannelConfig channel;
  FaultConfig faults;
  std::uint64_t seed = 0;
  SimTime max_time = 50'000'000;
  int step_budget = 4000;
  int dup_factor = 1;  // send every combine increment this many times
  CombineMode mode = CombineMode::Indirection;
  bool collapsed_ids = false;
};

struct DistributedResult {
  enum class Status { NormalForm, StepLimit, Timeout, Corrupt } status =
      Status::Timeout;
  ExprPtr expr;           // readback (NormalForm only)
  std::string expr_text;
  std::string store_text; // canonical store, for bit-identical comparisons
  int fired_rewrites = 0;
  std::string problem;    // Corrupt/Timeout diagnostics
  bool replicas_agree = false;
  TraceReport trace;
};

/// Multicasts Phi(expr) to every replica, fires branch on owners as their
/// replicas grow, and routes combine increments through the chaos channel.
/// At quiescence the readback of any replica equals the oracle normal form
/// whenever the expression normalizes within budget.
DistributedResult run_distributed(const ExprPtr& expr,
                                  const DistributedOptions& opts);

/// Random normalizing expressions for the test corpus: rejection-sampled so
/// the oracle terminates within oracle_budget steps, at least one rewrite
/// fires, and the full rewrite closure stays within closure_budget (so a
/// distributed run quiesces instead of grinding on discarded arguments).
std::vector<ExprPtr> normalizing_corpus(int count, std::uint64_t seed,
                                        int max_depth = 8,
                                        int oracle_budget = 200,
                                        int closure_budget = 400);

}  // namespace sdpf::sk

#endif  // SDPF_SK_HPP_
