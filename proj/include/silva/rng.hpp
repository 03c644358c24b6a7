#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace silva {

// Deterministic random stream. Wraps std::mt19937_64 (whose output sequence
// is fixed by the standard) and derives doubles from raw bits directly, so
// the stream is reproducible across platforms and standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1): never returns an endpoint, safe under log().
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
  }

  double uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform();
  }

  // Uniform integer in [0, n) via the multiply-shift reduction.
  std::uint32_t below(std::uint32_t n) {
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard Gumbel(0, 1) variate.
  double gumbel() { return -std::log(-std::log(uniform_open())); }

 private:
  std::mt19937_64 engine_;
};

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Per-document seed: a stable hash of (corpus seed, doc_id), so corpus
// generation is reproducible regardless of worker count or document order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view doc_id) {
  return splitmix64(splitmix64(seed) ^ fnv1a64(doc_id));
}

}  // namespace silva
