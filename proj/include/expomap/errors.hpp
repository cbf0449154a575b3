#pragma once

#include <stdexcept>
#include <string>

namespace expomap {

// Invalid inputs, broken invariants, malformed config values.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file content; carries the 1-based line number when known.
struct ParseError : ValidationError {
  ParseError(const std::string& what, long line_no = -1)
      : ValidationError(line_no >= 0 ? what + " (line " + std::to_string(line_no) + ")" : what),
        line(line_no) {}
  long line;
};

// Non-finite loss during optimization; carries the failing epoch.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, int at_epoch)
      : std::runtime_error(what + " (epoch " + std::to_string(at_epoch) + ")"),
        epoch(at_epoch) {}
  int epoch;
};

// Filesystem-level failures: unreadable input, unwritable output.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace expomap
