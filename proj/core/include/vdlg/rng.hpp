#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace vdlg {

// 64-bit FNV-1a. Used for corpus hashes and per-parameter seed derivation.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::string_view name) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((seed >> (8 * i)) & 0xff);
  return fnv1a64(name, fnv1a64(std::string_view(buf, 8)));
}

// Seeded generator with platform-independent draw helpers. All randomness in the
// library flows through this type so that a (seed, config) pair pins every output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1). 53 random mantissa bits, no distribution object involved.
  double uniform() { return std::ldexp(static_cast<double>(engine_() >> 11), -53); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n) {
    // modulo bias is < 2^-40 for the n used here (corpus-scale, n << 2^24)
    return engine_() % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller. One value per call; no cached spare, so the
  // draw count is a pure function of call count.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Independent child stream; used to decouple concerns (init vs masking vs data).
  Rng fork(std::string_view label) const {
    return Rng(hash_combine(state_hash(), label));
  }

 private:
  std::uint64_t state_hash() const {
    auto copy = engine_;
    return copy();
  }

  mutable std::mt19937_64 engine_;
};

}  // namespace vdlg
