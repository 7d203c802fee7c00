#pragma once

#include <cstdint>
#include <random>

namespace vrpg {

/// Purpose tags for sub-stream derivation. Each consumer of randomness gets
/// its own tag so that adding draws in one place never shifts another stream.
enum class StreamTag : std::uint64_t {
  kTrajectory = 0x7472616aULL,  // rollouts: (batch counter, trajectory index)
  kBranch = 0x6272616eULL,      // PAGE-PG switch: (iteration)
  kInit = 0x696e6974ULL,        // policy initialisation
  kOutput = 0x6f757470ULL,      // output-iterate selection
  kUser = 0x75736572ULL,        // free for tests and tools
};

/// SplitMix64 finaliser; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the sub-stream identified by (master, tag, a, b).
constexpr std::uint64_t derive_seed(std::uint64_t master, StreamTag tag, std::uint64_t a = 0,
                                    std::uint64_t b = 0) noexcept {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ static_cast<std::uint64_t>(tag));
  h = mix64(h ^ a);
  h = mix64(h ^ (b + 0x632be59bd9b4e019ULL));
  return h;
}

/// Seeded random stream. Uniform doubles are formed from the top 53 bits of
/// the engine output so sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t master, StreamTag tag, std::uint64_t a = 0,
                    std::uint64_t b = 0) {
    return Rng(derive_seed(master, tag, a, b));
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Uses rejection to avoid modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace vrpg
