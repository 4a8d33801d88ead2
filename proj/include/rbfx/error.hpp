#pragma once

#include <stdexcept>
#include <string>

namespace rbfx {

enum class ErrorCode {
  InvalidArgument,
  DomainError,
  UnsupportedOrder,
  DimensionMismatch,
  EmptyPointSet,
  DuplicatePoints,
  NotDeterminingSet,
  SingularSystem,
  MomentViolation,
  NegativeQuadraticForm,
  KernelMismatch,
  OutOfRange,
  DegenerateSamples,
  InvalidConfig,
  ParseError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::InvalidArgument: return "invalid argument";
  case ErrorCode::DomainError: return "domain error";
  case ErrorCode::UnsupportedOrder: return "unsupported derivative order";
  case ErrorCode::DimensionMismatch: return "dimension mismatch";
  case ErrorCode::EmptyPointSet: return "empty point set";
  case ErrorCode::DuplicatePoints: return "duplicate points";
  case ErrorCode::NotDeterminingSet: return "not a determining set";
  case ErrorCode::SingularSystem: return "numerically singular system";
  case ErrorCode::MomentViolation: return "moment condition violated";
  case ErrorCode::NegativeQuadraticForm: return "negative quadratic form";
  case ErrorCode::KernelMismatch: return "kernel mismatch";
  case ErrorCode::OutOfRange: return "argument out of range";
  case ErrorCode::DegenerateSamples: return "degenerate samples";
  case ErrorCode::InvalidConfig: return "invalid configuration";
  case ErrorCode::ParseError: return "parse error";
  }
  return "unknown error";
}

/// Exception thrown by every rbfx operation. The code identifies the
/// failure class so callers (and tests) can branch without string matching.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Singular-system failure carrying the condition estimate that triggered it.
class SingularSystemError : public Error {
public:
  SingularSystemError(const std::string& what, double condition_estimate)
      : Error(ErrorCode::SingularSystem, what), condition_(condition_estimate) {}

  double condition_estimate() const noexcept { return condition_; }

private:
  double condition_;
};

} // namespace rbfx
