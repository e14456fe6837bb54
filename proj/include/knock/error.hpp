#pragma once

#include <stdexcept>
#include <string>

namespace knock {

enum class ErrorKind {
  Usage,
  Io,
  Parse,
  WidthMismatch,
  InvariantViolation,
  UnknownPreset,
  NoBimodalDistribution,
  OracleUnusable,
  PairNotInTrace,
  QuorumFailure,
  InsufficientData,
  NoBasis,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto a stable exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace knock
