#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tasu {

using TokenId = std::int32_t;

/// A token id sequence. Utterance transcriptions and decoder output are
/// blank-free; per-frame label paths (argmax_labels) may contain the blank.
using TokenSequence = std::vector<TokenId>;

inline constexpr double kDefaultRowTolerance = 1e-5;
inline constexpr std::string_view kBlankToken = "<blank>";

/// Ordered token inventory. Line/position i holds the token with id i.
class Vocab {
 public:
  Vocab(std::vector<std::string> tokens, TokenId blank_id);

  /// Vocabulary of `size` tokens named "w00", "w01", ... with "<blank>" at
  /// `blank_id`. Used wherever only the id space matters.
  static Vocab synthetic(std::size_t size, TokenId blank_id = 0);

  std::size_t size() const { return tokens_.size(); }
  TokenId blank_id() const { return blank_id_; }
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Throws ValidationError for unknown tokens.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;

  /// Splits on whitespace and maps every piece to its id. Blank tokens are
  /// rejected since transcripts are blank-free.
  TokenSequence encode(std::string_view line) const;
  std::string decode(std::span<const TokenId> ids) const;

 private:
  std::vector<std::string> tokens_;
  TokenId blank_id_;
  std::unordered_map<std::string, TokenId> index_;
};

/// T x V row-major matrix of frame posteriors stored as float32.
class PosteriorSequence {
 public:
  PosteriorSequence() = default;
  PosteriorSequence(std::size_t vocab_size, TokenId blank_id);
  PosteriorSequence(std::size_t num_frames, std::size_t vocab_size, TokenId blank_id,
                    std::vector<float> data);

  std::size_t num_frames() const { return vocab_size_ == 0 ? 0 : data_.size() / vocab_size_; }
  std::size_t vocab_size() const { return vocab_size_; }
  TokenId blank_id() const { return blank_id_; }
  bool empty() const { return data_.empty(); }

  std::span<const float> frame(std::size_t t) const {
    return {data_.data() + t * vocab_size_, vocab_size_};
  }
  std::span<float> frame(std::size_t t) { return {data_.data() + t * vocab_size_, vocab_size_}; }

  const std::vector<float>& data() const { return data_; }

  void append(std::span<const float> frame);
  void append(std::span<const double> frame);
  void insert(std::size_t position, std::span<const float> frame);
  void reserve(std::size_t frames) { data_.reserve(frames * vocab_size_); }

  /// Exact (bitwise) equality of shape, blank id, and frames.
  friend bool operator==(const PosteriorSequence& a, const PosteriorSequence& b);

 private:
  std::size_t vocab_size_ = 0;
  TokenId blank_id_ = 0;
  std::vector<float> data_;
};

/// Throws RowNotStochastic or EntryOutOfRange on the first offending row.
void validate(const PosteriorSequence& posteriors, double tolerance = kDefaultRowTolerance);
bool is_valid(const PosteriorSequence& posteriors, double tolerance = kDefaultRowTolerance);

/// Index of the largest entry; ties go to the lowest index.
TokenId argmax(std::span<const float> frame);
TokenId argmax(std::span<const double> frame);

/// Per-frame argmax path (may contain blank).
TokenSequence argmax_labels(const PosteriorSequence& posteriors);

/// Merges adjacent equal ids.
TokenSequence run_dedup(std::span<const TokenId> ids);

/// Merges repeats, then drops blanks.
TokenSequence collapse_path(std::span<const TokenId> path, TokenId blank_id);

/// Greedy CTC collapse of the argmax path.
TokenSequence greedy_collapse(const PosteriorSequence& posteriors);

/// Throws TokenOutOfRange if any id is outside [0, vocab_size).
void check_token_range(std::span<const TokenId> ids, std::size_t vocab_size);

/// Throws BlankInSequence if `ids` contains the blank.
void check_blank_free(std::span<const TokenId> ids, TokenId blank_id);

}  // namespace tasu
