#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tasu/posterior.hpp"
#include "tasu/rng.hpp"

namespace tasu {

// CTC posterior simulation: turn a token sequence into pseudo CTC posteriors.
//
//   1. label smoothing   p_t = alpha * onehot(y_t) + (1 - alpha) / V,
//                        alpha ~ U(lambda_low, lambda_high) once per sequence
//   2. deletions         every frame dropped independently with prob p_del
//   3. insertions        floor(|S| * p_ins) sequential insertions at a uniform
//                        position in [0, |S|]; each is a copy of
//                        S[max(0, pos - 1)] or, with equal probability (and
//                        always when S is empty), the one-hot blank vector
//
// Every stage draws from its own RngStream addressed by (seed, stage,
// utterance index), so output never depends on batch order.

struct CpsConfig {
  double lambda_low = 0.8;
  double lambda_high = 1.0;
  double p_del = 0.05;
  double p_ins = 0.05;
  TokenId blank_id = 0;
  /// Draw a fresh alpha per token instead of once per sequence.
  bool per_token_alpha = false;

  void check() const;
};

enum class FrameOrigin : std::uint8_t { kSmoothed, kDuplicate, kBlankInsert };

const char* to_string(FrameOrigin origin);

/// CPS output with per-frame supervision labels. Smoothed frames carry their
/// source token, duplicates the label of the copied frame, blank inserts the
/// blank id.
struct CpsTrace {
  PosteriorSequence posteriors;
  std::vector<TokenId> labels;
  std::vector<FrameOrigin> origins;
  double alpha = 1.0;  // first alpha drawn (the only one unless per-token)
  std::size_t frames_after_deletion = 0;
  std::size_t insertions = 0;
};

PosteriorSequence smooth(std::span<const TokenId> tokens, double alpha, std::size_t vocab_size,
                         TokenId blank_id);

PosteriorSequence random_deletions(const PosteriorSequence& frames, double p_del,
                                   RngStream& rng);

PosteriorSequence random_insertions(const PosteriorSequence& frames, double p_ins,
                                    RngStream& rng);

/// floor(length * p_ins).
std::size_t insertion_count(std::size_t length, double p_ins);

CpsTrace cps_trace(std::span<const TokenId> tokens, const CpsConfig& config,
                   std::size_t vocab_size, std::uint64_t seed, std::uint64_t utterance = 0);

PosteriorSequence cps_simulate(std::span<const TokenId> tokens, const CpsConfig& config,
                               std::size_t vocab_size, std::uint64_t seed,
                               std::uint64_t utterance = 0);

}  // namespace tasu
