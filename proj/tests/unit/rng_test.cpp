#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "tasu/rng.hpp"

namespace tasu {
namespace {

using Counter = Philox4x32::Counter;
using Key = Philox4x32::Key;

// Known-answer vectors of Philox4x32-10 from the Random123 distribution.
TEST(Philox, KnownAnswerZero) {
  const Counter out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes) {
  const Counter out = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                           {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const Counter out = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                           {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(RngStream, SameAddressSameNumbers) {
  RngStream a(42, Stage::kSmoothing, 7);
  RngStream b(42, Stage::kSmoothing, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u32(), b.next_u32());
}

TEST(RngStream, AddressesAreIndependent) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t seed : {1ull, 2ull, 1ull << 32}) {
    for (Stage stage : {Stage::kSmoothing, Stage::kDeletion, Stage::kInsertion}) {
      for (std::uint64_t index : {0ull, 1ull, 1ull << 33}) {
        firsts.insert(RngStream(seed, stage, index).next_u64());
      }
    }
  }
  EXPECT_EQ(firsts.size(), 27u);
}

TEST(RngStream, FirstWordsMatchBlockOutput) {
  const std::uint64_t seed = 0x0123456789abcdefull;
  RngStream s(seed, Stage::kSynth, 0x500000003ull);
  const Counter block = Philox4x32::generate(
      {0, static_cast<std::uint32_t>(Stage::kSynth), 3, 5}, {0x89abcdefu, 0x01234567u});
  for (std::uint32_t word : block) EXPECT_EQ(s.next_u32(), word);
  const Counter next = Philox4x32::generate(
      {1, static_cast<std::uint32_t>(Stage::kSynth), 3, 5}, {0x89abcdefu, 0x01234567u});
  EXPECT_EQ(s.next_u32(), next[0]);
}

TEST(RngStream, UniformInUnitInterval) {
  RngStream s(3, Stage::kSynth);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // mean of U(0,1): sd of the sample mean is sqrt(1/12/n)
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(RngStream, UniformRangeDegenerate) {
  RngStream s(3, Stage::kSynth);
  EXPECT_EQ(s.uniform(0.25, 0.25), 0.25);
  for (int i = 0; i < 1000; ++i) {
    const double u = s.uniform(0.8, 1.0);
    EXPECT_GE(u, 0.8);
    EXPECT_LT(u, 1.0);
  }
}

TEST(RngStream, IndexCoversRangeEvenly) {
  RngStream s(11, Stage::kShuffle);
  const std::size_t n = 7;
  const int draws = 70000;
  std::vector<int> counts(n, 0);
  for (int i = 0; i < draws; ++i) {
    const std::size_t k = s.index(n);
    ASSERT_LT(k, n);
    ++counts[k];
  }
  double chi2 = 0.0;
  const double expected = static_cast<double>(draws) / n;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 22.46);  // chi-square, 6 dof, p = 0.001
}

TEST(RngStream, IndexRejectsEmptyRange) {
  RngStream s(1, Stage::kShuffle);
  EXPECT_THROW(s.index(0), std::invalid_argument);
}

TEST(RngStream, UniformIntInclusiveBounds) {
  RngStream s(5, Stage::kSynth);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = s.uniform_int(-2, 3);
    ASSERT_GE(v, -2);
    ASSERT_LE(v, 3);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 6u);
  EXPECT_EQ(s.uniform_int(4, 4), 4);
  EXPECT_THROW(s.uniform_int(2, 1), std::invalid_argument);
}

TEST(RngStream, BernoulliRate) {
  RngStream s(9, Stage::kDeletion);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += s.bernoulli(0.05) ? 1 : 0;
  const double sigma = std::sqrt(n * 0.05 * 0.95);
  EXPECT_NEAR(hits, n * 0.05, 3.0 * sigma);
  EXPECT_FALSE(s.bernoulli(0.0));
  EXPECT_TRUE(s.bernoulli(1.0));
}

TEST(RngStream, ShuffleIsPermutation) {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  RngStream s(1, Stage::kShuffle);
  s.shuffle(w.begin(), w.end());
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(DeriveSeed, DistinctAndStable) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}

}  // namespace
}  // namespace tasu
