#pragma once

#include <stdexcept>
#include <string>

namespace qngc {

/// Violated precondition on a numeric or structural argument.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data that is well-formed but cannot support the requested estimate
/// (no heralds, empty peaks, all-zero counts).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The coincidence criterion is not violated, so a depth is undefined.
/// This is a valid measurement outcome, kept distinct from failures.
class CriterionNotViolated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FormatErrorKind {
  io,
  bad_magic,
  bad_version,
  truncated,
  non_monotone,
  unknown_channel,
  bad_header,
};

class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace qngc
