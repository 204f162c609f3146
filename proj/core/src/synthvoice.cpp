#include "tasu/synthvoice.hpp"

#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tasu/error.hpp"

namespace tasu {
namespace {

class FrameWriter {
 public:
  FrameWriter(const SynthConfig& config, std::size_t vocab_size, TokenId blank_id,
              RngStream& rng, Utterance& out)
      : config_(config), blank_(blank_id), rng_(rng), out_(out), row_(vocab_size),
        weights_(vocab_size) {}

  void token_run(TokenId label, std::int32_t position) {
    const auto frames = rng_.uniform_int(config_.min_repeat, config_.max_repeat);
    for (std::int64_t i = 0; i < frames; ++i) {
      emit(label, rng_.uniform(config_.peak_low, config_.peak_high), position);
    }
  }

  void blank_run() {
    const auto frames = rng_.uniform_int(config_.min_blank, config_.max_blank);
    for (std::int64_t i = 0; i < frames; ++i) {
      emit(blank_, rng_.uniform(config_.blank_peak_low, config_.blank_peak_high), -1);
    }
  }

 private:
  void emit(TokenId label, double peak, std::int32_t position) {
    const std::size_t vocab = row_.size();
    const auto hot = static_cast<std::size_t>(label);
    const double rest = 1.0 - peak;
    if (config_.off_label_concentration > 0.0) {
      double total = 0.0;
      for (std::size_t k = 0; k < vocab; ++k) {
        weights_[k] = k == hot ? 0.0 : std::pow(rng_.uniform(), config_.off_label_concentration);
        total += weights_[k];
      }
      for (std::size_t k = 0; k < vocab; ++k) {
        row_[k] = total > 0.0 ? rest * weights_[k] / total : rest / static_cast<double>(vocab - 1);
      }
    } else {
      std::fill(row_.begin(), row_.end(), rest / static_cast<double>(vocab - 1));
    }
    row_[hot] = peak;
    out_.posteriors.append(std::span<const double>(row_));
    out_.frame_labels.push_back(label);
    out_.frame_positions.push_back(position);
  }

  const SynthConfig& config_;
  TokenId blank_;
  RngStream& rng_;
  Utterance& out_;
  std::vector<double> row_;
  std::vector<double> weights_;
};

}  // namespace

void SynthConfig::check(std::size_t vocab_size) const {
  if (vocab_size < 2) throw ConfigError("synthetic encoder needs V >= 2");
  if (min_repeat < 1 || min_repeat > max_repeat) {
    throw ConfigError(fmt::format("need 1 <= min_repeat <= max_repeat, got {}..{}", min_repeat,
                                  max_repeat));
  }
  if (min_blank < 1 || min_blank > max_blank) {
    throw ConfigError(
        fmt::format("need 1 <= min_blank <= max_blank, got {}..{}", min_blank, max_blank));
  }
  if (!(blank_gap_prob >= 0.0 && blank_gap_prob <= 1.0)) {
    throw ConfigError(fmt::format("blank_gap_prob must lie in [0, 1], got {}", blank_gap_prob));
  }
  const double floor = 1.0 / static_cast<double>(vocab_size);
  auto check_peaks = [floor](double low, double high, const char* name) {
    if (!(low > floor && low <= high && high <= 1.0)) {
      throw ConfigError(fmt::format("{} bounds must satisfy 1/V < low <= high <= 1, got {}..{}",
                                    name, low, high));
    }
  };
  check_peaks(peak_low, peak_high, "peak");
  check_peaks(blank_peak_low, blank_peak_high, "blank_peak");
  if (!(off_label_concentration >= 0.0 && std::isfinite(off_label_concentration))) {
    throw ConfigError("off_label_concentration must be finite and non-negative");
  }
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"min_repeat", c.min_repeat},
          {"max_repeat", c.max_repeat},
          {"blank_gap_prob", c.blank_gap_prob},
          {"min_blank", c.min_blank},
          {"max_blank", c.max_blank},
          {"peak_low", c.peak_low},
          {"peak_high", c.peak_high},
          {"blank_peak_low", c.blank_peak_low},
          {"blank_peak_high", c.blank_peak_high},
          {"off_label_concentration", c.off_label_concentration}};
}

Utterance synth_utterance(std::span<const TokenId> tokens, const SynthConfig& config,
                          std::size_t vocab_size, TokenId blank_id, std::uint64_t seed,
                          std::uint64_t index, Stage stage) {
  config.check(vocab_size);
  check_token_range(tokens, vocab_size);
  if (blank_id < 0 || static_cast<std::size_t>(blank_id) >= vocab_size) {
    throw TokenOutOfRange(blank_id, vocab_size);
  }
  Utterance out;
  out.tokens.assign(tokens.begin(), tokens.end());
  out.posteriors = PosteriorSequence(vocab_size, blank_id);

  RngStream rng(seed, stage, index);
  FrameWriter writer(config, vocab_size, blank_id, rng, out);
  writer.blank_run();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && rng.bernoulli(config.blank_gap_prob)) writer.blank_run();
    writer.token_run(tokens[i], static_cast<std::int32_t>(i));
  }
  writer.blank_run();
  return out;
}

PosteriorSequence synth_posteriors(std::span<const TokenId> tokens, const SynthConfig& config,
                                   std::size_t vocab_size, TokenId blank_id,
                                   std::uint64_t seed, std::uint64_t index) {
  return synth_utterance(tokens, config, vocab_size, blank_id, seed, index).posteriors;
}

std::vector<TokenSequence> gen_corpus(std::size_t count, std::size_t len_low,
                                      std::size_t len_high, std::span<const TokenId> pool,
                                      std::uint64_t seed, Stage stage) {
  if (len_low < 1 || len_low > len_high) {
    throw ConfigError(
        fmt::format("need 1 <= len_low <= len_high, got {}..{}", len_low, len_high));
  }
  if (pool.empty()) throw ConfigError("token pool is empty");
  std::vector<TokenSequence> corpus;
  corpus.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RngStream rng(seed, stage, i);
    const auto length = static_cast<std::size_t>(rng.uniform_int(
        static_cast<std::int64_t>(len_low), static_cast<std::int64_t>(len_high)));
    TokenSequence utt(length);
    for (auto& id : utt) id = pool[rng.index(pool.size())];
    corpus.push_back(std::move(utt));
  }
  return corpus;
}

std::vector<TokenSequence> gen_corpus(std::size_t count, std::size_t len_low,
                                      std::size_t len_high, std::size_t vocab_size,
                                      TokenId blank_id, std::uint64_t seed, Stage stage) {
  if (vocab_size < 2) throw ConfigError("corpus generation needs V >= 2");
  return gen_corpus(count, len_low, len_high, token_pool(vocab_size, blank_id), seed, stage);
}

std::vector<TokenId> token_pool(std::size_t vocab_size, TokenId blank_id, TokenId first,
                                TokenId last) {
  if (last < 0) last = static_cast<TokenId>(vocab_size) - 1;
  if (first < 0 || last >= static_cast<TokenId>(vocab_size) || first > last) {
    throw ConfigError(fmt::format("token range {}..{} is outside the vocabulary", first, last));
  }
  std::vector<TokenId> pool;
  for (TokenId id = first; id <= last; ++id) {
    if (id != blank_id) pool.push_back(id);
  }
  return pool;
}

}  // namespace tasu
