#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qmmm {

enum class ErrorCode {
  InvalidArgument,
  InvalidModel,
  ParseError,
  DomainError,
  NonFinite,
  NonIntegrable,
  Overflow,
  NoSignChange,
  MaxIter,
  SingularSigma,
  Infeasible,
  AtomLimit,
  InsufficientRows,
  InsufficientSamples,
  NotSerializable,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code; the CLI maps codes to exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qmmm
