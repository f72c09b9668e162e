#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace conformal {

/// Invalid level, empty calibration set, bad sizes.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Input for which the statistic is undefined (e.g. F = 0/0 on an all-zero vector).
class DegenerateInputError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Mismatched lengths or dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Gradient descent produced a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. `line()` is 1-based, 0 when the error is not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

  /// Same error with `context` (e.g. a file name) prepended to the message.
  static ParseError with_context(const std::string& context, const ParseError& inner) {
    ParseError e(context + ": " + inner.what(), 0);
    e.line_ = inner.line_;
    return e;
  }

 private:
  std::size_t line_;
};

}  // namespace conformal
