#pragma once

#include <cmath>
#include <cstdint>

namespace aanim {

// Counter-based deterministic generator built on the SplitMix64 finalizer.
// Draw i from seed s is mix(s + (i+1) * 0x9E3779B97F4A7C15). Streams are
// reproducible from (seed, counter) alone, so any implementation of the
// same mixing function recovers identical sample sequences.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double next_gaussian() {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  // Independent substream: hash the parent seed with a stream tag.
  CounterRng split(std::uint64_t tag) const {
    CounterRng r(seed_ ^ (0x9E3779B97F4A7C15ULL + tag * 0xD1B54A32D192ED03ULL));
    std::uint64_t z = r.seed_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    r.seed_ = z ^ (z >> 31);
    return r;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// FNV-1a, used to fingerprint serialized model parameters.
inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xCBF29CE484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace aanim
