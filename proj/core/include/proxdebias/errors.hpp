#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace proxdebias {

/// Malformed input file or stream. `line()` is 1-based; 0 when the error is
/// not tied to a particular line (e.g. empty input).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& message);

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A token required by an operation is not in the vocabulary.
class MissingTokenError : public std::invalid_argument {
 public:
  explicit MissingTokenError(const std::string& token);

  const std::string& token() const noexcept { return token_; }

 private:
  std::string token_;
};

}  // namespace proxdebias
