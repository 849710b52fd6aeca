#ifndef SAECF_RANDOM_HPP
#define SAECF_RANDOM_HPP

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace saecf {

// Name recorded in run metadata; every stochastic stage draws from this engine.
inline constexpr const char* kGeneratorName = "mt19937_64";

// SplitMix64 finalizer. Used to derive well-separated seeds for named streams
// from one user-facing seed, so nearby seeds don't produce correlated runs.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

// Uniform double in [0, 1) from the top 53 bits. Identical on every platform,
// unlike std::uniform_real_distribution.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unbiased uniform integer in [0, bound) by rejection.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

// In-place Fisher-Yates shuffle. std::shuffle's draw sequence is
// implementation-defined; this one is pinned.
template <class T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_below(rng, i)]);
  }
}

}  // namespace saecf

#endif
