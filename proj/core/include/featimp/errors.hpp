#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace featimp {

/// Bad input data or arguments: domain violations, dimension mismatches,
/// contract breaches. Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed file content. Carries the 1-based line number when known.
class ParseError : public ValidationError {
 public:
  explicit ParseError(const std::string& what, std::size_t line = 0)
      : ValidationError(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Filesystem-level failure: missing file, unreadable path, failed write.
/// Maps to CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace featimp
