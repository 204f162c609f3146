#include "tasu/posterior.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include <fmt/format.h>

#include "tasu/error.hpp"

namespace tasu {

Vocab::Vocab(std::vector<std::string> tokens, TokenId blank_id)
    : tokens_(std::move(tokens)), blank_id_(blank_id) {
  if (tokens_.empty()) throw ConfigError("vocabulary is empty");
  if (blank_id_ < 0 || static_cast<std::size_t>(blank_id_) >= tokens_.size()) {
    throw ConfigError(
        fmt::format("blank id {} is outside [0, {})", blank_id_, tokens_.size()));
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const std::string& tok = tokens_[i];
    if (tok.empty()) throw ConfigError(fmt::format("vocabulary entry {} is empty", i));
    if (!index_.emplace(tok, static_cast<TokenId>(i)).second) {
      throw ConfigError(fmt::format("duplicate vocabulary token '{}'", tok));
    }
  }
}

Vocab Vocab::synthetic(std::size_t size, TokenId blank_id) {
  std::vector<std::string> tokens;
  tokens.reserve(size);
  const int width = size > 100 ? static_cast<int>(std::to_string(size - 1).size()) : 2;
  for (std::size_t i = 0; i < size; ++i) {
    if (static_cast<TokenId>(i) == blank_id) {
      tokens.emplace_back(kBlankToken);
    } else {
      tokens.push_back(fmt::format("w{:0{}}", i, width));
    }
  }
  return Vocab(std::move(tokens), blank_id);
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw TokenOutOfRange(id, tokens_.size());
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) {
    throw ValidationError(fmt::format("token '{}' is not in the vocabulary", token));
  }
  return it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

TokenSequence Vocab::encode(std::string_view line) const {
  TokenSequence ids;
  std::istringstream in{std::string(line)};
  std::string piece;
  while (in >> piece) {
    TokenId id = this->id(piece);
    if (id == blank_id_) throw BlankInSequence(ids.size());
    ids.push_back(id);
  }
  return ids;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

PosteriorSequence::PosteriorSequence(std::size_t vocab_size, TokenId blank_id)
    : vocab_size_(vocab_size), blank_id_(blank_id) {}

PosteriorSequence::PosteriorSequence(std::size_t num_frames, std::size_t vocab_size,
                                     TokenId blank_id, std::vector<float> data)
    : vocab_size_(vocab_size), blank_id_(blank_id), data_(std::move(data)) {
  if (data_.size() != num_frames * vocab_size) {
    throw ShapeMismatch(fmt::format("posterior payload has {} values, expected {} x {}",
                                    data_.size(), num_frames, vocab_size));
  }
}

void PosteriorSequence::append(std::span<const float> frame) {
  if (frame.size() != vocab_size_) {
    throw ShapeMismatch(
        fmt::format("frame has {} entries, expected {}", frame.size(), vocab_size_));
  }
  data_.insert(data_.end(), frame.begin(), frame.end());
}

void PosteriorSequence::append(std::span<const double> frame) {
  if (frame.size() != vocab_size_) {
    throw ShapeMismatch(
        fmt::format("frame has {} entries, expected {}", frame.size(), vocab_size_));
  }
  for (double v : frame) data_.push_back(static_cast<float>(v));
}

void PosteriorSequence::insert(std::size_t position, std::span<const float> frame) {
  if (frame.size() != vocab_size_) {
    throw ShapeMismatch(
        fmt::format("frame has {} entries, expected {}", frame.size(), vocab_size_));
  }
  if (position > num_frames()) {
    throw ShapeMismatch(
        fmt::format("insert position {} past end ({})", position, num_frames()));
  }
  // Copy first: `frame` may alias our own storage.
  std::vector<float> copy(frame.begin(), frame.end());
  data_.insert(data_.begin() + static_cast<std::ptrdiff_t>(position * vocab_size_),
               copy.begin(), copy.end());
}

bool operator==(const PosteriorSequence& a, const PosteriorSequence& b) {
  if (a.vocab_size_ != b.vocab_size_ || a.blank_id_ != b.blank_id_ ||
      a.data_.size() != b.data_.size()) {
    return false;
  }
  return a.data_.empty() ||
         std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0;
}

void validate(const PosteriorSequence& posteriors, double tolerance) {
  const std::size_t frames = posteriors.num_frames();
  const std::size_t vocab = posteriors.vocab_size();
  if (posteriors.blank_id() < 0 ||
      (vocab > 0 && static_cast<std::size_t>(posteriors.blank_id()) >= vocab)) {
    throw TokenOutOfRange(posteriors.blank_id(), vocab);
  }
  for (std::size_t t = 0; t < frames; ++t) {
    auto row = posteriors.frame(t);
    double sum = 0.0;
    for (std::size_t k = 0; k < vocab; ++k) {
      const double v = row[k];
      if (!(v >= 0.0 && v <= 1.0)) throw EntryOutOfRange(t, k, v);
      sum += v;
    }
    if (std::abs(sum - 1.0) > tolerance) throw RowNotStochastic(t, sum);
  }
}

bool is_valid(const PosteriorSequence& posteriors, double tolerance) {
  try {
    validate(posteriors, tolerance);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

namespace {

template <typename T>
TokenId argmax_impl(std::span<const T> frame) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < frame.size(); ++k) {
    if (frame[k] > frame[best]) best = k;
  }
  return static_cast<TokenId>(best);
}

}  // namespace

TokenId argmax(std::span<const float> frame) { return argmax_impl(frame); }
TokenId argmax(std::span<const double> frame) { return argmax_impl(frame); }

TokenSequence argmax_labels(const PosteriorSequence& posteriors) {
  TokenSequence labels(posteriors.num_frames());
  for (std::size_t t = 0; t < labels.size(); ++t) labels[t] = argmax(posteriors.frame(t));
  return labels;
}

TokenSequence run_dedup(std::span<const TokenId> ids) {
  TokenSequence out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i == 0 || ids[i] != ids[i - 1]) out.push_back(ids[i]);
  }
  return out;
}

TokenSequence collapse_path(std::span<const TokenId> path, TokenId blank_id) {
  TokenSequence out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path[i] == blank_id) continue;
    if (i > 0 && path[i] == path[i - 1]) continue;
    out.push_back(path[i]);
  }
  return out;
}

TokenSequence greedy_collapse(const PosteriorSequence& posteriors) {
  return collapse_path(argmax_labels(posteriors), posteriors.blank_id());
}

void check_token_range(std::span<const TokenId> ids, std::size_t vocab_size) {
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw TokenOutOfRange(id, vocab_size);
    }
  }
}

void check_blank_free(std::span<const TokenId> ids, TokenId blank_id) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == blank_id) throw BlankInSequence(i);
  }
}

}  // namespace tasu
