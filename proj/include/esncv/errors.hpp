#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace esncv {

/// Base for all errors raised by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (dimension mismatch and the like).
class contract_error : public error {
 public:
  using error::error;
};

/// Hyper-parameters or run settings that cannot be honoured.
class config_error : public error {
 public:
  using error::error;
};

/// A linear system that could not be solved reliably.
class numerical_error : public error {
 public:
  numerical_error(const std::string& what, double condition_estimate)
      : error(what), condition_estimate_(condition_estimate) {}

  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// A validation geometry that does not fit the data.
class planning_error : public error {
 public:
  using error::error;
};

/// Malformed or unreadable input file. `line` is 1-based, 0 when not applicable.
class load_error : public error {
 public:
  load_error(const std::string& what, std::size_t line = 0)
      : error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace esncv
