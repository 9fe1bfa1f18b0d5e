#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace embprobe {

/// Base error for everything the toolkit rejects: malformed input files,
/// violated preconditions, numerical divergence.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse error carrying the 1-based line (or record) number where it occurred.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace embprobe
