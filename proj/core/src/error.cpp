#include "tasu/error.hpp"

#include <fmt/format.h>

namespace tasu {

RowNotStochastic::RowNotStochastic(std::size_t row, double sum)
    : ValidationError(fmt::format("row {} is not stochastic (sum = {:.9g})", row, sum)),
      row_(row),
      sum_(sum) {}

EntryOutOfRange::EntryOutOfRange(std::size_t row, std::size_t col, double value)
    : ValidationError(
          fmt::format("entry ({}, {}) = {:.9g} is outside [0, 1]", row, col, value)),
      row_(row),
      col_(col),
      value_(value) {}

TokenOutOfRange::TokenOutOfRange(std::int64_t token, std::size_t vocab_size)
    : ValidationError(
          fmt::format("token id {} is outside [0, {})", token, vocab_size)),
      token_(token) {}

BlankInSequence::BlankInSequence(std::size_t position)
    : ValidationError(
          fmt::format("blank token at position {} of a label sequence", position)),
      position_(position) {}

VersionMismatch::VersionMismatch(unsigned found, unsigned expected)
    : ValidationError(
          fmt::format("format version {} is not supported (expected {})", found, expected)) {}

NonFiniteLoss::NonFiniteLoss(std::size_t step)
    : RuntimeFailure(fmt::format("loss became non-finite at step {}", step)),
      step_(step) {}

}  // namespace tasu
