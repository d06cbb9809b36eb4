#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isqr {

// Every failure the library reports carries one of these kinds; the CLI maps
// them onto exit codes.
enum class ErrorKind {
  DimensionMismatch,
  NonPositiveTime,
  NoEvents,
  NonFiniteValue,
  InvalidArgument,
  EmptyRiskSet,
  LengthMismatch,
  NonPositiveMultiplier,
  BigMTooSmall,
  ZeroSmoothingScale,
  Unidentifiable,
  SingularSlope,
  MaxIterExceeded,
  NonPositiveDefiniteSigma,
  DegenerateResamples,
  NonPositiveResidualQuantile,
  TargetUnreachable,
  ParseError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonPositiveTime: return "NonPositiveTime";
    case ErrorKind::NoEvents: return "NoEvents";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyRiskSet: return "EmptyRiskSet";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NonPositiveMultiplier: return "NonPositiveMultiplier";
    case ErrorKind::BigMTooSmall: return "BigMTooSmall";
    case ErrorKind::ZeroSmoothingScale: return "ZeroSmoothingScale";
    case ErrorKind::Unidentifiable: return "Unidentifiable";
    case ErrorKind::SingularSlope: return "SingularSlope";
    case ErrorKind::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorKind::NonPositiveDefiniteSigma: return "NonPositiveDefiniteSigma";
    case ErrorKind::DegenerateResamples: return "DegenerateResamples";
    case ErrorKind::NonPositiveResidualQuantile: return "NonPositiveResidualQuantile";
    case ErrorKind::TargetUnreachable: return "TargetUnreachable";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace isqr
