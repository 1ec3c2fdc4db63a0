#pragma once

#include <cstdint>
#include <string_view>

namespace tessellate {

// SplitMix64 (Steele, Lea, Flood). Bit-exact on every platform, which is the
// only property the random relation relies on.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

// Unbiased draw from [0, n) by rejection: words at or above the largest
// multiple of n below 2^64 are redrawn. Precondition: n >= 1.
constexpr std::uint64_t uniform_index(SplitMix64& rng, std::uint64_t n) {
  const std::uint64_t rem = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    std::uint64_t w = rng.next();
    if (rem == 0 || w < 0 - rem) return w % n;
  }
}

// Per-connection stream: FNV-1a of the connection id, xor relation seed,
// xor scenario master seed.
constexpr SplitMix64 relation_stream(std::string_view connection_id, std::uint64_t seed,
                                     std::uint64_t master_seed) {
  return SplitMix64(fnv1a64(connection_id) ^ seed ^ master_seed);
}

}  // namespace tessellate
