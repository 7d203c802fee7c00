#include "vrpg/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace vrpg {
namespace {

TEST(Rng, SameStreamSameSequence) {
  Rng a = Rng::stream(42, StreamTag::kTrajectory, 3, 7);
  Rng b = Rng::stream(42, StreamTag::kTrajectory, 3, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, DerivedSeedsDifferAcrossEveryComponent) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t master : {0ULL, 1ULL}) {
    for (StreamTag tag : {StreamTag::kTrajectory, StreamTag::kBranch, StreamTag::kInit}) {
      for (std::uint64_t a = 0; a < 4; ++a) {
        for (std::uint64_t b = 0; b < 4; ++b) seeds.insert(derive_seed(master, tag, a, b));
      }
    }
  }
  EXPECT_EQ(seeds.size(), 2u * 3u * 4u * 4u);
}

TEST(Rng, SwappedIndicesGiveDifferentStreams) {
  EXPECT_NE(derive_seed(5, StreamTag::kTrajectory, 1, 2), derive_seed(5, StreamTag::kTrajectory, 2, 1));
}

TEST(Rng, UniformUsesTop53Bits) {
  Rng a(99);
  std::mt19937_64 raw(99);
  for (int i = 0; i < 50; ++i) {
    const double want = static_cast<double>(raw() >> 11) / 9007199254740992.0;
    EXPECT_EQ(a.uniform(), want);
  }
}

TEST(Rng, UniformStaysInRange) {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform(-2.0, 3.0);
    EXPECT_GE(u, -2.0);
    EXPECT_LT(u, 3.0);
  }
}

TEST(Rng, BelowIsRoughlyUniform) {
  Rng r(7);
  constexpr int kDraws = 60000;
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < kDraws; ++i) ++counts[r.below(3)];
  const double sd = std::sqrt(kDraws * (1.0 / 3.0) * (2.0 / 3.0));
  for (int c : counts) EXPECT_LT(std::abs(c - kDraws / 3.0), 4.0 * sd);
}

}  // namespace
}  // namespace vrpg
