#ifndef SDPF_RNG_HPP_
#define SDPF_RNG_HPP_

#include <cstdint>
#include <string_view>

#include "sdpf/ids.hpp"

namespace sdpf {

/// SplitMix64 step (Steele, Lea, Flood). Used for seeding and id mixing.
std::uint64_t splitmix64(std::uint64_t& state);

/// One-shot mix of a 64-bit value through the SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t v);

/// Deterministic xoshiro256** stream. Every run owns its streams; results
/// are reproducible across re-runs on the same platform from the seed alone.
/// std::uniform_real_distribution is deliberately avoided: its output is
/// implementation-defined, which would break byte-identical reports.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  /// Derives an independent stream for a named purpose (channel, latency,
  /// workload payloads) so that chaos draws never perturb payload draws.
  static RngStream derive(std::uint64_t seed, std::string_view tag);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  /// Bernoulli draw; consumes one uniform even when p is 0 or 1.
  bool chance(double p);

 private:
  std::uint64_t s_[4];
};

/// FNV-1a over bytes, used for trace and report hashing.
class Fnv64 {
 public:
  void update(const void* data, std::size_t len);
  void update_u64(std::uint64_t v);
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

/// 128-bit content hash: two independently offset FNV-1a passes, each run
/// through the SplitMix64 finalizer. Not cryptographic; collision-resistant
/// at simulation scale (zero collisions expected over ~2^30 inputs).
Rid hash128(std::string_view bytes);

}  // namespace sdpf

#endif  // SDPF_RNG_HPP_
