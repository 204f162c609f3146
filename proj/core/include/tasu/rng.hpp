#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace tasu {

/// Philox4x32-10 block function (Salmon et al., Random123). Maps a 128-bit
/// counter under a 64-bit key to 128 pseudo-random bits.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key);
};

/// Purpose tags that namespace the random streams of one run. Changing a
/// value changes every output derived from it, so treat these as frozen.
enum class Stage : std::uint32_t {
  kSmoothing = 1,
  kDeletion = 2,
  kInsertion = 3,
  kSynth = 4,
  kCorpusTrain = 5,
  kCorpusEval = 6,
  kCorpusHeldout = 7,
  kProjectorInit = 8,
  kDecoderInit = 9,
  kShuffle = 10,
  kGradCheck = 11,
  kCorpusSft = 12,
  kCorpusDomainB = 13,
  kSynthEval = 14,
  kSynthSft = 15,
  kCorpusSftHeldout = 16,
  kSynthSftHeldout = 17,
};

/// A stream of random numbers addressed by (seed, stage, index). Two streams
/// with different addresses are independent, so batch jobs may draw for
/// utterance i without knowing how many numbers utterance i-1 consumed.
///
/// All derived distributions are implemented here rather than through
/// <random> distributions, whose algorithms differ between standard
/// libraries; this keeps seeded output identical across platforms.
class RngStream {
 public:
  RngStream(std::uint64_t seed, Stage stage, std::uint64_t index = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [low, high); returns low when low == high.
  double uniform(double low, double high);
  /// Uniform integer on [low, high] inclusive, unbiased.
  std::int64_t uniform_int(std::int64_t low, std::int64_t high);
  /// Uniform index on [0, n); n must be positive.
  std::size_t index(std::size_t n);
  bool bernoulli(double p);

  /// Fisher-Yates shuffle.
  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = index(i);
      using std::swap;
      swap(first[static_cast<std::ptrdiff_t>(i - 1)], first[static_cast<std::ptrdiff_t>(j)]);
    }
  }

 private:
  void refill();

  Philox4x32::Key key_;
  Philox4x32::Counter counter_;
  Philox4x32::Counter block_{};
  unsigned used_ = 4;
};

/// Derives a child seed; used to give experiment arms independent seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace tasu
