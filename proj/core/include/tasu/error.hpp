#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tasu {

// Errors fall in two families. ValidationError covers malformed inputs
// (bad files, bad configs, out-of-range tokens); RuntimeFailure covers
// failures of a well-formed computation, such as a diverging optimizer.
// The CLI maps them to exit codes 2 and 3.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class RowNotStochastic : public ValidationError {
 public:
  RowNotStochastic(std::size_t row, double sum);
  std::size_t row() const { return row_; }
  double sum() const { return sum_; }

 private:
  std::size_t row_;
  double sum_;
};

class EntryOutOfRange : public ValidationError {
 public:
  EntryOutOfRange(std::size_t row, std::size_t col, double value);
  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }
  double value() const { return value_; }

 private:
  std::size_t row_;
  std::size_t col_;
  double value_;
};

class TokenOutOfRange : public ValidationError {
 public:
  TokenOutOfRange(std::int64_t token, std::size_t vocab_size);
  std::int64_t token() const { return token_; }

 private:
  std::int64_t token_;
};

class BlankInSequence : public ValidationError {
 public:
  explicit BlankInSequence(std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class BadMagic : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class VersionMismatch : public ValidationError {
 public:
  VersionMismatch(unsigned found, unsigned expected);
};

class TruncatedPayload : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ShapeMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonFiniteLoss : public RuntimeFailure {
 public:
  explicit NonFiniteLoss(std::size_t step);
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace tasu
