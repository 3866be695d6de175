#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace treelm {

// splitmix64: the single PRNG used everywhere randomness is needed.
// Fully specified here so that streams are bit-identical across platforms;
// artifacts that embed random choices record "splitmix64" plus the seed in
// their metadata.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, bound) via rejection sampling.
  uint64_t below(uint64_t bound) {
    if (bound <= 1) return 0;
    uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform double in [0, 1) with 53 bits of randomness.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller on two uniform draws.
  double normal() {
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Fisher-Yates shuffle, draw order fixed by the stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  static const char* algorithm_name() { return "splitmix64"; }

 private:
  uint64_t state_;
};

// FNV-1a, used only for deriving per-sequence seeds from string ids.
inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Per-sequence seed: base ^ fnv1a(doc_id) ^ golden-ratio-scrambled window index,
// passed through one splitmix64 step. Documented so corpora are reproducible.
inline uint64_t derive_seed(uint64_t base, const std::string& doc_id, uint64_t window_index) {
  uint64_t mixed = base ^ fnv1a64(doc_id) ^ (window_index * 0x9E3779B97F4A7C15ULL);
  return SplitMix64(mixed).next();
}

}  // namespace treelm
