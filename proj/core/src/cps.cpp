#include "tasu/cps.hpp"

#include <cmath>

#include <fmt/format.h>

#include "tasu/error.hpp"

namespace tasu {
namespace {

// Sequence being edited together with its per-frame labels and origins.
struct Tracked {
  PosteriorSequence frames;
  std::vector<TokenId> labels;
  std::vector<FrameOrigin> origins;
};

Tracked untracked(const PosteriorSequence& frames) {
  Tracked out{frames, {}, {}};
  out.labels.assign(frames.num_frames(), -1);
  out.origins.assign(frames.num_frames(), FrameOrigin::kSmoothed);
  return out;
}

void append_smoothed(PosteriorSequence& out, TokenId token, double alpha,
                     std::vector<float>& row) {
  const double base = (1.0 - alpha) / static_cast<double>(row.size());
  std::fill(row.begin(), row.end(), static_cast<float>(base));
  row[static_cast<std::size_t>(token)] = static_cast<float>(alpha + base);
  out.append(std::span<const float>(row));
}

Tracked delete_frames(const Tracked& in, double p_del, RngStream& rng) {
  Tracked out{PosteriorSequence(in.frames.vocab_size(), in.frames.blank_id()), {}, {}};
  for (std::size_t t = 0; t < in.frames.num_frames(); ++t) {
    if (rng.bernoulli(1.0 - p_del)) {
      out.frames.append(in.frames.frame(t));
      out.labels.push_back(in.labels[t]);
      out.origins.push_back(in.origins[t]);
    }
  }
  return out;
}

std::size_t insert_frames(Tracked& seq, double p_ins, RngStream& rng) {
  const std::size_t count = insertion_count(seq.frames.num_frames(), p_ins);
  const TokenId blank = seq.frames.blank_id();
  std::vector<float> blank_row(seq.frames.vocab_size(), 0.0f);
  blank_row[static_cast<std::size_t>(blank)] = 1.0f;

  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t length = seq.frames.num_frames();
    const std::size_t pos = rng.index(length + 1);
    const bool duplicate = rng.bernoulli(0.5) && length > 0;
    const auto at = static_cast<std::ptrdiff_t>(pos);
    if (duplicate) {
      const std::size_t src = pos == 0 ? 0 : pos - 1;
      seq.frames.insert(pos, seq.frames.frame(src));
      seq.labels.insert(seq.labels.begin() + at, seq.labels[src]);
      seq.origins.insert(seq.origins.begin() + at, FrameOrigin::kDuplicate);
    } else {
      seq.frames.insert(pos, blank_row);
      seq.labels.insert(seq.labels.begin() + at, blank);
      seq.origins.insert(seq.origins.begin() + at, FrameOrigin::kBlankInsert);
    }
  }
  return count;
}

void check_probability(double p, const char* name, bool allow_one) {
  if (!(p >= 0.0 && (allow_one ? p <= 1.0 : p < 1.0))) {
    throw ConfigError(fmt::format("{} must lie in [0, 1{} got {}", name, allow_one ? "]," : "),", p));
  }
}

}  // namespace

void CpsConfig::check() const {
  check_probability(lambda_low, "lambda_low", true);
  check_probability(lambda_high, "lambda_high", true);
  if (lambda_low > lambda_high) {
    throw ConfigError(
        fmt::format("lambda_low ({}) exceeds lambda_high ({})", lambda_low, lambda_high));
  }
  check_probability(p_del, "p_del", false);
  check_probability(p_ins, "p_ins", false);
  if (blank_id < 0) throw ConfigError("blank_id must be non-negative");
}

const char* to_string(FrameOrigin origin) {
  switch (origin) {
    case FrameOrigin::kSmoothed: return "smoothed";
    case FrameOrigin::kDuplicate: return "duplicate";
    case FrameOrigin::kBlankInsert: return "blank_insert";
  }
  return "unknown";
}

PosteriorSequence smooth(std::span<const TokenId> tokens, double alpha, std::size_t vocab_size,
                         TokenId blank_id) {
  check_token_range(tokens, vocab_size);
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError(fmt::format("alpha must lie in [0, 1], got {}", alpha));
  }
  PosteriorSequence out(vocab_size, blank_id);
  out.reserve(tokens.size());
  std::vector<float> row(vocab_size);
  for (TokenId token : tokens) append_smoothed(out, token, alpha, row);
  return out;
}

PosteriorSequence random_deletions(const PosteriorSequence& frames, double p_del,
                                   RngStream& rng) {
  check_probability(p_del, "p_del", false);
  return delete_frames(untracked(frames), p_del, rng).frames;
}

PosteriorSequence random_insertions(const PosteriorSequence& frames, double p_ins,
                                    RngStream& rng) {
  check_probability(p_ins, "p_ins", false);
  Tracked seq = untracked(frames);
  insert_frames(seq, p_ins, rng);
  return std::move(seq.frames);
}

std::size_t insertion_count(std::size_t length, double p_ins) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(length) * p_ins));
}

CpsTrace cps_trace(std::span<const TokenId> tokens, const CpsConfig& config,
                   std::size_t vocab_size, std::uint64_t seed, std::uint64_t utterance) {
  config.check();
  if (static_cast<std::size_t>(config.blank_id) >= vocab_size) {
    throw TokenOutOfRange(config.blank_id, vocab_size);
  }
  check_token_range(tokens, vocab_size);

  RngStream alpha_rng(seed, Stage::kSmoothing, utterance);
  RngStream delete_rng(seed, Stage::kDeletion, utterance);
  RngStream insert_rng(seed, Stage::kInsertion, utterance);

  CpsTrace trace;
  Tracked seq{PosteriorSequence(vocab_size, config.blank_id), {}, {}};
  seq.frames.reserve(tokens.size());
  std::vector<float> row(vocab_size);
  trace.alpha = alpha_rng.uniform(config.lambda_low, config.lambda_high);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    double alpha = trace.alpha;
    if (config.per_token_alpha && t > 0) {
      alpha = alpha_rng.uniform(config.lambda_low, config.lambda_high);
    }
    append_smoothed(seq.frames, tokens[t], alpha, row);
    seq.labels.push_back(tokens[t]);
    seq.origins.push_back(FrameOrigin::kSmoothed);
  }

  seq = delete_frames(seq, config.p_del, delete_rng);
  trace.frames_after_deletion = seq.frames.num_frames();
  trace.insertions = insert_frames(seq, config.p_ins, insert_rng);

  trace.posteriors = std::move(seq.frames);
  trace.labels = std::move(seq.labels);
  trace.origins = std::move(seq.origins);
  return trace;
}

PosteriorSequence cps_simulate(std::span<const TokenId> tokens, const CpsConfig& config,
                               std::size_t vocab_size, std::uint64_t seed,
                               std::uint64_t utterance) {
  return cps_trace(tokens, config, vocab_size, seed, utterance).posteriors;
}

}  // namespace tasu
