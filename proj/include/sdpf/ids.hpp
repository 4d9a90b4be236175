#ifndef SDPF_IDS_HPP_
#define SDPF_IDS_HPP_

#include <compare>
#include <cstdint>
#include <string>

namespace sdpf {

using TileId = std::uint64_t;
using TargetId = std::uint64_t;
using NodeId = std::uint32_t;
using OpCode = std::uint32_t;
using MsgId = std::uint64_t;

/// Simulated time in integer nanosecond-like units.
using SimTime = std::int64_t;

/// 128-bit replay identifier. Ordered lexicographically on (hi, lo), which
/// is the tie-break order used by the lattice.
struct Rid {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  auto operator<=>(const Rid&) const = default;
};

std::string to_hex(const Rid& rid);
std::string to_hex(std::uint64_t v);

}  // namespace sdpf

#endif  // SDPF_IDS_HPP_
