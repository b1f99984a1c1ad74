#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace elw {

enum class ErrorCode {
  // numeric failures
  InfeasibleLambda,
  ConvergenceFailure,
  HullViolation,
  SingularHessian,
  ZeroMeanDirection,
  SingularCovariance,
  RankDeficient,
  OneClass,
  SingularD,
  TooManyFailures,
  AllReplicatesFailed,
  // input / validation failures
  NonFinite,
  InvalidArgument,
  InvalidData,
  ShapeMismatch,
  EmptyConstraints,
  BadColumn,
  BadMoments,
  ParseError,
  SchemaMismatch,
  ConfigError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InfeasibleLambda: return "InfeasibleLambda";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::HullViolation: return "HullViolation";
    case ErrorCode::SingularHessian: return "SingularHessian";
    case ErrorCode::ZeroMeanDirection: return "ZeroMeanDirection";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::OneClass: return "OneClass";
    case ErrorCode::SingularD: return "SingularD";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
    case ErrorCode::AllReplicatesFailed: return "AllReplicatesFailed";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidData: return "InvalidData";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyConstraints: return "EmptyConstraints";
    case ErrorCode::BadColumn: return "BadColumn";
    case ErrorCode::BadMoments: return "BadMoments";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library. The code says what went wrong; the
/// message says where.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

  /// True for failures of the numerical procedures themselves, as opposed to
  /// malformed input or configuration.
  bool is_numeric() const noexcept {
    return code_ <= ErrorCode::AllReplicatesFailed;
  }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace elw
