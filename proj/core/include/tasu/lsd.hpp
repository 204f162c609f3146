#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tasu/posterior.hpp"

namespace tasu {

// Label-synchronous decoding: compact a CTC posterior sequence by removing
// frames whose blank probability exceeds tau, then replacing every maximal
// run of frames sharing an argmax label by the run's mean vector.
//
// Runs are formed on the sequence left after blank removal, so two frames
// that were separated only by removed blanks can merge. Frames whose argmax
// is the blank but whose blank probability is <= tau survive and merge like
// any other label.

struct LsdConfig {
  double tau = 0.9;

  /// Throws ConfigError unless 0 < tau <= 1.
  void check() const;
};

struct LsdReport {
  std::size_t frames_in = 0;
  std::size_t frames_after_blank_removal = 0;
  std::size_t frames_out = 0;
  /// frames_in / frames_out; +inf when everything was removed, 1 when T = 0.
  double downsampling_ratio = 1.0;
};

struct LsdResult {
  PosteriorSequence posteriors;
  LsdReport report;
  /// Input frame indices kept by blank removal, in order.
  std::vector<std::size_t> kept_frames;
  /// Output frame j averages kept_frames[run_offsets[j] .. run_offsets[j+1]).
  std::vector<std::size_t> run_offsets;
};

/// Indices t with P_t(blank) <= tau.
std::vector<std::size_t> kept_frame_indices(const PosteriorSequence& posteriors,
                                            const LsdConfig& config);

PosteriorSequence blank_removal(const PosteriorSequence& posteriors, const LsdConfig& config);

PosteriorSequence merge_consecutive(const PosteriorSequence& posteriors);

LsdResult lsd(const PosteriorSequence& posteriors, const LsdConfig& config);

double downsampling_ratio(std::size_t frames_in, std::size_t frames_out);

/// Non-finite ratios serialize as the string "inf".
nlohmann::json to_json(const LsdReport& report);

}  // namespace tasu
