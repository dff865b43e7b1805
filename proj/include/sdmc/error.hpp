#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdmc {

enum class ErrorKind {
  InvalidArgument,
  DuplicateCoordinates,
  NonPositiveExponent,
  SelfNeighbor,
  IndexOutOfRange,
  DimensionMismatch,
  UnbalancedPanel,
  NonFiniteValue,
  NonPositiveLogInput,
  RankDeficient,
  AllVariablesTimeInvariant,
  UnknownVariable,
  UnknownCluster,
  RhoOutOfBounds,
  RhoOnBoundary,
  NoCommonCoefficients,
  NonPsdCovariance,
  InadmissibleRho,
  ParseError,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DuplicateCoordinates: return "DuplicateCoordinates";
    case ErrorKind::NonPositiveExponent: return "NonPositiveExponent";
    case ErrorKind::SelfNeighbor: return "SelfNeighbor";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::NonPositiveLogInput: return "NonPositiveLogInput";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::AllVariablesTimeInvariant: return "AllVariablesTimeInvariant";
    case ErrorKind::UnknownVariable: return "UnknownVariable";
    case ErrorKind::UnknownCluster: return "UnknownCluster";
    case ErrorKind::RhoOutOfBounds: return "RhoOutOfBounds";
    case ErrorKind::RhoOnBoundary: return "RhoOnBoundary";
    case ErrorKind::NoCommonCoefficients: return "NoCommonCoefficients";
    case ErrorKind::NonPsdCovariance: return "NonPsdCovariance";
    case ErrorKind::InadmissibleRho: return "InadmissibleRho";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a kind so callers (and the
/// CLI) can report it in a machine-parsable way.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace sdmc
