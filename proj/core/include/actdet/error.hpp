#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace actdet {

// Base class for every error caused by invalid caller input (bad boxes,
// malformed files, unsatisfiable constraints). Anything else escaping the
// library is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidBox : public Error {
 public:
  using Error::Error;
};

// Malformed input line in a JSONL / CSV stream. `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

}  // namespace actdet
