#pragma once

#include <cstdint>
#include <random>

namespace defsc {

enum class StreamRole : std::uint64_t {
  Potential = 1,
  Wigner = 2,
  Auxiliary = 3,
};

/// SplitMix64 finaliser; used to derive independent substream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// A caller-owned random stream. Streams for different (seed, trial, role)
/// triples are keyed by hashing the triple, so no state is shared between
/// trials and the potential never correlates with the Wigner entries.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  static RngStream substream(std::uint64_t seed, std::uint64_t trial_index, StreamRole role) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ trial_index);
    h = splitmix64(h ^ static_cast<std::uint64_t>(role));
    return RngStream(h);
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform double in [0, 1) built from the top 53 bits; platform independent.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace defsc
