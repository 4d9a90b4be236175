#ifndef SDPF_FLOW_HPP_
#define SDPF_FLOW_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sdpf/errors.hpp"
#include "sdpf/ids.hpp"
#include "sdpf/lattice.hpp"

namespace sdpf {

/// Accounted metadata overhead per increment. The wire header is exactly
/// this many bytes: id(8) target(8) op(4) next(4) rid(16).
inline constexpr std::int64_t kMetadataBytes = 40;

/// Continuation marker ending a flow.
inline constexpr OpCode kOpTerminal = 0xffffffffu;

// The closed op registry used by the experiments.
inline constexpr OpCode kOpMerge = 0;        // merge payload into the target
inline constexpr OpCode kOpMaxExtract = 1;   // emit max of carried values
inline constexpr OpCode kOpPairJoin = 2;     // combine a left/right tile pair

/// The five mandatory self-describing fields. Construct via MetadataDraft
/// (or directly when all fields are statically known).
struct Metadata {
  TileId id = 0;
  TargetId target = 0;
  OpCode op = 0;
  OpCode next = kOpTerminal;
  Rid rid;

  friend bool operator==(const Metadata&, const Metadata&) = default;
};

/// Validating builder: every field must be set, otherwise build() raises a
/// MissingFieldError naming the omitted field. This is where the metadata
/// minimality ablations (target-off, op-off, next-off) are rejected.
struct MetadataDraft {
  std::optional<TileId> id;
  std::optional<TargetId> target;
  std::optional<OpCode> op;
  std::optional<OpCode> next;
  std::optional<Rid> rid;

  Metadata build() const;
};

using Payload = std::variant<std::string, JoinValue>;

/// The atomic self-describing message: metadata plus payload. The payload is
/// raw bytes for continuation ops, a JoinValue for merges.
struct Increment {
  Metadata meta;
  Payload payload;

  /// Accounted payload size: raw byte length, or the encoded body length of
  /// the lattice value (no wire framing). An empty-payload increment is
  /// exactly kMetadataBytes.
  std::int64_t payload_bytes() const;
  std::int64_t size_bytes() const { return kMetadataBytes + payload_bytes(); }

  friend bool operator==(const Increment&, const Increment&) = default;
};

/// Wire format (little-endian, bit-exact round trip):
///   header: id u64 | target u64 | op u32 | next u32 | rid.hi u64 | rid.lo u64
///   payload: kind u8 (0 raw, 1 max, 2 set, 3 sum, 4 tiles) | body
///   raw:   len u32 | bytes
///   max:   value i64
///   set:   count u32 | (len u32, bytes)*
///   sum:   count u32 | (rid 16B, value i64)*
///   tiles: count u32 | (id u64, state u8, rid 16B,
///                       Present: len u32 + bytes | Tombstone: has_fwd u8 [+ fwd u64])*
std::string encode_increment(const Increment& inc);
Increment decode_increment(std::string_view bytes);

std::string encode_payload(const Payload& p);

/// Semantic provenance of an emitted increment. tile_ids must be sorted;
/// make_provenance canonicalizes.
struct RidProvenance {
  std::vector<TileId> tile_ids;
  OpCode op = 0;
  std::uint32_t rule_tag = 0;
  std::uint32_t position = 0;
};

RidProvenance make_provenance(std::vector<TileId> tile_ids, OpCode op,
                              std::uint32_t rule_tag, std::uint32_t position);

/// Deterministic, collision-resistant rid from provenance: re-emitting the
/// same semantic contribution always yields the same rid, so duplicate
/// firings and task replays converge instead of double-counting.
Rid derive_rid(const RidProvenance& provenance);

/// Registry of pure functions (S2). Ops see only (op, payload, next); any
/// routing information rides inside the payload, never in executor state.
class OpRegistry {
 public:
  using OpFn =
      std::function<std::vector<Increment>(std::string_view payload, OpCode next)>;

  void register_op(OpCode op, std::string name, OpFn fn);
  bool contains(OpCode op) const { return ops_.count(op) != 0; }
  const std::string& name_of(OpCode op) const;

  /// Applies a registered op. Throws UnknownOpError for an unregistered
  /// op-code (the op-ablation case: no information on how to process).
  std::vector<Increment> apply_op(OpCode op, std::string_view payload,
                                  OpCode next) const;

 private:
  struct Entry {
    std::string name;
    OpFn fn;
  };
  std::map<OpCode, Entry> ops_;
};

/// Registry with the experiment ops (max-extract, pair-join) installed.
OpRegistry standard_registry();

// Payload codecs for the standard ops.
struct MaxExtractPayload {
  TileId source_tile = 0;
  TargetId out_target = 0;
  std::vector<std::int64_t> values;
};
std::string encode_max_extract(const MaxExtractPayload& p);
MaxExtractPayload decode_max_extract(std::string_view bytes);

struct PairHalfPayload {
  std::uint64_t pair_key = 0;
  std::uint8_t side = 0;  // 0 = left, 1 = right
  std::int64_t value = 0;
  TargetId out_target = 0;
};

/// Encoded size of one half, padded to match the combined output's merge
/// payload (uniform increment size within a pair workload).
inline constexpr std::size_t kPairHalfBytes = 28;
std::string encode_pair_half(const PairHalfPayload& p);
PairHalfPayload decode_pair_half(std::string_view bytes);

/// Concatenation of the two halves, left first; this is what kOpPairJoin
/// receives once a pair is complete.
std::string encode_pair_input(const PairHalfPayload& left,
                              const PairHalfPayload& right);

}  // namespace sdpf

#endif  // SDPF_FLOW_HPP_
