#include "tasu/lsd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tasu/error.hpp"

namespace tasu {
namespace {

// Appends the mean of `rows` (indices into `source`) to `out`. Every row of
// a run has argmax `label`, so the exact mean does too; rounding to float can
// still tie a lower index with it, and such ties are pushed down one ulp.
void append_mean(const PosteriorSequence& source, const std::vector<std::size_t>& rows,
                 std::size_t begin, std::size_t end, TokenId label, std::vector<double>& scratch,
                 std::vector<float>& mean, PosteriorSequence& out) {
  std::fill(scratch.begin(), scratch.end(), 0.0);
  for (std::size_t i = begin; i < end; ++i) {
    auto frame = source.frame(rows[i]);
    for (std::size_t k = 0; k < scratch.size(); ++k) scratch[k] += frame[k];
  }
  const double count = static_cast<double>(end - begin);
  for (std::size_t k = 0; k < scratch.size(); ++k) {
    mean[k] = static_cast<float>(scratch[k] / count);
  }
  const auto top = static_cast<std::size_t>(label);
  for (std::size_t k = 0; k < top; ++k) {
    if (mean[k] >= mean[top]) mean[k] = std::nextafter(mean[top], 0.0f);
  }
  out.append(std::span<const float>(mean));
}

// Splits `rows` into maximal runs of equal argmax; returns run start offsets
// plus a trailing rows.size().
std::vector<std::size_t> label_runs(const PosteriorSequence& source,
                                    const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> offsets;
  TokenId previous = -1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TokenId label = argmax(source.frame(rows[i]));
    if (i == 0 || label != previous) offsets.push_back(i);
    previous = label;
  }
  offsets.push_back(rows.size());
  return offsets;
}

PosteriorSequence merge_runs(const PosteriorSequence& source,
                             const std::vector<std::size_t>& rows,
                             const std::vector<std::size_t>& offsets) {
  PosteriorSequence out(source.vocab_size(), source.blank_id());
  out.reserve(offsets.size() - 1);
  std::vector<double> scratch(source.vocab_size());
  std::vector<float> mean(source.vocab_size());
  for (std::size_t j = 0; j + 1 < offsets.size(); ++j) {
    const TokenId label = argmax(source.frame(rows[offsets[j]]));
    append_mean(source, rows, offsets[j], offsets[j + 1], label, scratch, mean, out);
  }
  return out;
}

}  // namespace

void LsdConfig::check() const {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw ConfigError(fmt::format("tau must lie in (0, 1], got {}", tau));
  }
}

std::vector<std::size_t> kept_frame_indices(const PosteriorSequence& posteriors,
                                            const LsdConfig& config) {
  config.check();
  std::vector<std::size_t> kept;
  const auto blank = static_cast<std::size_t>(posteriors.blank_id());
  for (std::size_t t = 0; t < posteriors.num_frames(); ++t) {
    if (!(static_cast<double>(posteriors.frame(t)[blank]) > config.tau)) kept.push_back(t);
  }
  return kept;
}

PosteriorSequence blank_removal(const PosteriorSequence& posteriors, const LsdConfig& config) {
  PosteriorSequence out(posteriors.vocab_size(), posteriors.blank_id());
  for (std::size_t t : kept_frame_indices(posteriors, config)) out.append(posteriors.frame(t));
  return out;
}

PosteriorSequence merge_consecutive(const PosteriorSequence& posteriors) {
  std::vector<std::size_t> rows(posteriors.num_frames());
  for (std::size_t t = 0; t < rows.size(); ++t) rows[t] = t;
  return merge_runs(posteriors, rows, label_runs(posteriors, rows));
}

LsdResult lsd(const PosteriorSequence& posteriors, const LsdConfig& config) {
  LsdResult result;
  result.kept_frames = kept_frame_indices(posteriors, config);
  result.run_offsets = label_runs(posteriors, result.kept_frames);
  result.posteriors = merge_runs(posteriors, result.kept_frames, result.run_offsets);

  auto& report = result.report;
  report.frames_in = posteriors.num_frames();
  report.frames_after_blank_removal = result.kept_frames.size();
  report.frames_out = result.posteriors.num_frames();
  report.downsampling_ratio = downsampling_ratio(report.frames_in, report.frames_out);
  return result;
}

double downsampling_ratio(std::size_t frames_in, std::size_t frames_out) {
  if (frames_in == 0) return 1.0;
  if (frames_out == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(frames_in) / static_cast<double>(frames_out);
}

nlohmann::json to_json(const LsdReport& report) {
  nlohmann::json ratio = report.downsampling_ratio;
  if (!std::isfinite(report.downsampling_ratio)) ratio = "inf";
  return {{"frames_in", report.frames_in},
          {"frames_after_blank_removal", report.frames_after_blank_removal},
          {"frames_out", report.frames_out},
          {"downsampling_ratio", ratio}};
}

}  // namespace tasu
