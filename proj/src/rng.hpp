#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace csim::rng {

// Reproducibility contract: every random quantity in the library is drawn
// from a Stream keyed by a path of integer ids below a root seed. Streams
// are produced by counter-style key mixing, never by drawing from a parent
// stream, so adding replications, generations or draw purposes never
// perturbs the values of existing streams. Samplers are transform-based
// (no rejection in the normal path), so a stream yields the same sequence
// on every run.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// One mixing round combining a key with a child id.
inline std::uint64_t mix_key(std::uint64_t key, std::uint64_t id) {
  std::uint64_t s = key + 0x9e3779b97f4a7c15ull * (id + 0x632be59bd9b4e019ull);
  return splitmix64(s);
}

enum class Purpose : std::uint64_t {
  features = 0x11,
  responses = 0x22,
  weights = 0x33,
  generic = 0x44,
};

// xoshiro256++ engine seeded through splitmix64.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(t);
    has_cached_ = true;
    return r * std::cos(t);
  }

  // Uniform integer in [0, bound) by rejection on the top bits.
  std::uint64_t uniform_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Hierarchical stream key: root seed -> replication -> generation -> purpose.
struct StreamKey {
  std::uint64_t value = 0;

  StreamKey child(std::uint64_t id) const { return {mix_key(value, id)}; }
  StreamKey child(Purpose p) const {
    return child(static_cast<std::uint64_t>(p));
  }
  Stream stream() const { return Stream(value); }
};

inline StreamKey root_key(std::uint64_t seed) {
  return {mix_key(seed, 0x9d5ce3a8f7b21c4full)};
}

}  // namespace csim::rng
