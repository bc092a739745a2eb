#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pct {

// Malformed text input (OFF files). Carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Malformed or inconsistent binary container (PCNT files).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration file or a configuration that violates a build constraint.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values surfaced during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pct
