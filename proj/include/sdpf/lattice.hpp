#ifndef SDPF_LATTICE_HPP_
#define SDPF_LATTICE_HPP_

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "sdpf/errors.hpp"
#include "sdpf/ids.hpp"

namespace sdpf {

/// Max-register lattice over signed 64-bit integers. Bottom is the minimum
/// representable value.
struct MaxRegister {
  std::int64_t value = std::numeric_limits<std::int64_t>::min();

  friend bool operator==(const MaxRegister&, const MaxRegister&) = default;
};

/// Grow-only set of opaque byte strings. Bottom is the empty set.
struct GrowSet {
  std::set<std::string> elements;

  friend bool operator==(const GrowSet&, const GrowSet&) = default;
};

/// Additive aggregation made idempotent per rid: the map itself is the
/// lattice element (union of entries), the scalar total is a derived view.
/// Re-merging an increment that carries an already-seen rid is a no-op.
struct RidKeyedSum {
  std::map<Rid, std::int64_t> entries;

  std::int64_t total() const;

  friend bool operator==(const RidKeyedSum&, const RidKeyedSum&) = default;
};

/// One cell of a tile store. Join order: absent < Present < Tombstone.
/// Within a state the join is the max over a total order, which keeps the
/// merge associative even when generators produce equal-rid conflicts:
///   - Present vs Present: larger (rid, payload) wins.
///   - Tombstone vs Tombstone: larger (rid, forward) wins.
/// A tombstone may carry a forward id: the splice left behind when a rewrite
/// retires a redex apex (readback follows it to the contractum root).
struct TileCell {
  enum class State : std::uint8_t { Present, Tombstone };

  State state = State::Present;
  Rid rid;
  std::string payload;             // Present only
  std::optional<TileId> forward;   // Tombstone only

  static TileCell present(std::string payload, Rid rid);
  static TileCell tombstone(Rid rid, std::optional<TileId> forward = {});

  friend bool operator==(const TileCell&, const TileCell&) = default;
};

TileCell join(const TileCell& a, const TileCell& b);

/// Map from tile id to cell; an id absent from the map is bottom.
struct TileStore {
  std::map<TileId, TileCell> entries;

  friend bool operator==(const TileStore&, const TileStore&) = default;
};

using JoinValue =
    std::variant<MaxRegister, GrowSet, RidKeyedSum, TileStore>;

const char* variant_name(const JoinValue& v);

/// Least upper bound. Throws VariantMismatchError when a and b are different
/// variants; such a call signals a misrouted increment, not a lattice state.
JoinValue join(const JoinValue& a, const JoinValue& b);

/// Partial order: a <= b iff join(a, b) == b.
bool leq(const JoinValue& a, const JoinValue& b);

/// Join of a non-empty homogeneous multiset; the unique limit, invariant
/// under permutation and duplication of the items.
JoinValue join_all(const std::vector<JoinValue>& items);

/// Canonical text form: sorted keys, decimal integers, hex-encoded byte
/// strings. Equal values serialize to byte-identical text (golden tests).
std::string canonical_text(const JoinValue& v);
std::string canonical_text(const TileCell& c);

}  // namespace sdpf

#endif  // SDPF_LATTICE_HPP_
