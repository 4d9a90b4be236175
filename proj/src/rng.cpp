#include "sdpf/rng.hpp"

#include <cstring>

namespace sdpf {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t mix64(std::uint64_t v) {
  std::uint64_t s = v;
  return splitmix64(s);
}

RngStream::RngStream(std::uint64_t seed) {
  std::uint64_t s = seed;
  for (auto& word : s_) word = splitmix64(s);
}

RngStream RngStream::derive(std::uint64_t seed, std::string_view tag) {
  Fnv64 h;
  h.update_u64(seed);
  h.update(tag.data(), tag.size());
  return RngStream(h.digest());
}

static inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::below(std::uint64_t n) {
  // Modulo bias is negligible for simulation-sized n.
  return next_u64() % n;
}

bool RngStream::chance(double p) { return uniform01() < p; }

void Fnv64::update(const void* data, std::size_t len) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h_ ^= bytes[i];
    h_ *= 0x100000001b3ull;
  }
}

void Fnv64::update_u64(std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  update(buf, 8);
}

Rid hash128(std::string_view bytes) {
  std::uint64_t a = 0xcbf29ce484222325ull;
  std::uint64_t b = 0x84222325cbf29ce4ull;
  for (unsigned char c : bytes) {
    a = (a ^ c) * 0x100000001b3ull;
    b = (b ^ c) * 0x100000001b3ull;
  }
  // Mix the lengths in so that prefixes do not collide, then finalize.
  a ^= bytes.size();
  b ^= bytes.size() * 0x9e3779b97f4a7c15ull;
  return Rid{mix64(a), mix64(b ^ mix64(a))};
}

std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::string to_hex(const Rid& rid) { return to_hex(rid.hi) + to_hex(rid.lo); }

}  // namespace sdpf
