// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>

namespace rollmini::rng {

// splitmix64 step (Steele et al. reference constants). Used both as a
// stream seeder and as the keyed hash behind all derived randomness, so
// every draw in the system is a pure function of its key tuple.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Combine an arbitrary key tuple into one 64-bit hash.
inline uint64_t mix(std::initializer_list<uint64_t> keys) {
  uint64_t state = 0x2545f4914f6cdd1dULL;
  uint64_t h = splitmix64(state);
  for (uint64_t k : keys) {
    state ^= k;
    h ^= splitmix64(state);
  }
  return h;
}

/// FNV-1a over bytes; used to key per-sample streams by string id.
inline uint64_t hash_str(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// xoshiro256** with explicitly serializable state.
class Stream {
 public:
  Stream() : Stream(0) {}
  explicit Stream(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Modulo bias is negligible for the small n
  /// used here and keeps the draw a single deterministic step.
  uint64_t next_below(uint64_t n) { return n ? next_u64() % n : 0; }

  /// Standard normal via Box-Muller on two fixed draws.
  double next_gaussian();

  std::array<uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<uint64_t, 4> state_{};
};

/// One-shot keyed uniform double in [0, 1).
inline double keyed_double(std::initializer_list<uint64_t> keys) {
  return static_cast<double>(mix(keys) >> 11) * 0x1.0p-53;
}

}  // namespace rollmini::rng
