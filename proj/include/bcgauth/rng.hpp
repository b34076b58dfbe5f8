// Deterministic random number generation.
//
// All randomness in the project flows from one root seed through named
// sub-streams (synth, init, shuffle, ga, ...), so each component can be
// reproduced in isolation. The generator is hand-rolled (xoshiro256++
// seeded via splitmix64) rather than <random> so that sequences are
// identical across standard library implementations.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace bcgauth {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
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

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t bits = next_u64() >> 11;  // 53 bits
    const auto scaled = static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(bits) * range) >> 53);
    return lo + static_cast<std::int64_t>(scaled);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller. Both uniforms are drawn every call and
  // the sine branch discarded, keeping the stream position independent of
  // call history.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

// Derives the seed of a named sub-stream from a root seed. Extra integer
// arguments distinguish repeated uses of one name (subject index, epoch, ...).
inline std::uint64_t substream(std::uint64_t root, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ull ^ root;
  for (const char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return splitmix64(h);
}

inline std::uint64_t substream(std::uint64_t root, std::string_view name,
                               std::uint64_t a) {
  std::uint64_t h = substream(root, name) ^ (a + 0x9e3779b97f4a7c15ull);
  return splitmix64(h);
}

inline std::uint64_t substream(std::uint64_t root, std::string_view name,
                               std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = substream(root, name, a) ^ (b * 0xd1342543de82ef95ull + 1);
  return splitmix64(h);
}

}  // namespace bcgauth
