#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tasu/posterior.hpp"
#include "tasu/rng.hpp"

namespace tasu {

/// Knobs of the synthetic CTC encoder. A token becomes a run of
/// U{min_repeat..max_repeat} frames with mass U(peak_low, peak_high) on the
/// label; blank runs of U{min_blank..max_blank} frames carry mass
/// U(blank_peak_low, blank_peak_high) on the blank. Off-label mass is spread
/// uniformly, or with random weights u^c when off_label_concentration c > 0.
struct SynthConfig {
  int min_repeat = 2;
  int max_repeat = 6;
  double blank_gap_prob = 0.9;
  int min_blank = 1;
  int max_blank = 4;
  double peak_low = 0.6;
  double peak_high = 0.98;
  double blank_peak_low = 0.88;
  double blank_peak_high = 1.0;
  double off_label_concentration = 0.0;

  /// Throws ConfigError; `vocab_size` enters the 1/V < peak bound.
  void check(std::size_t vocab_size) const;
};

nlohmann::json to_json(const SynthConfig& config);

/// Synthetic utterance with the generator's frame alignment.
struct Utterance {
  TokenSequence tokens;
  PosteriorSequence posteriors;
  /// Label that produced each frame (blank for blank runs).
  std::vector<TokenId> frame_labels;
  /// Position in `tokens` that produced each frame, -1 for blank runs.
  std::vector<std::int32_t> frame_positions;
};

Utterance synth_utterance(std::span<const TokenId> tokens, const SynthConfig& config,
                          std::size_t vocab_size, TokenId blank_id, std::uint64_t seed,
                          std::uint64_t index = 0, Stage stage = Stage::kSynth);

PosteriorSequence synth_posteriors(std::span<const TokenId> tokens, const SynthConfig& config,
                                   std::size_t vocab_size, TokenId blank_id,
                                   std::uint64_t seed, std::uint64_t index = 0);

/// `count` utterances of uniform length in [len_low, len_high] with tokens
/// drawn uniformly from `pool`. Utterance i uses stream (seed, stage, i).
std::vector<TokenSequence> gen_corpus(std::size_t count, std::size_t len_low,
                                      std::size_t len_high, std::span<const TokenId> pool,
                                      std::uint64_t seed, Stage stage = Stage::kCorpusTrain);

/// Same with the pool set to every non-blank id of a V-token vocabulary.
std::vector<TokenSequence> gen_corpus(std::size_t count, std::size_t len_low,
                                      std::size_t len_high, std::size_t vocab_size,
                                      TokenId blank_id, std::uint64_t seed,
                                      Stage stage = Stage::kCorpusTrain);

/// Non-blank ids in [first, last] (inclusive).
std::vector<TokenId> token_pool(std::size_t vocab_size, TokenId blank_id, TokenId first = 0,
                                TokenId last = -1);

}  // namespace tasu
