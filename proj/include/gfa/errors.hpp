#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gfa {

// Rejected input: malformed graph, out-of-range ids, dimension mismatch.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A quantity is mathematically undefined for this input (0/0, log 0, ...).
class Degenerate : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The operation is only defined for a narrower case (e.g. binary labels).
class Unsupported : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace gfa
