#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hypocoax {

enum class ErrorCode {
  InvalidInput,
  DimensionMismatch,
  SingularWeight,
  NonSymmetric,
  NotEquilibrium,
  InvalidMargin,
  WeightNotPositive,
  CannotCertify,
  UnresolvedBand,
  SingularBlock,
  InvalidGamma,
  QuadratureFailure,
  CoefficientSingular,
  BlowupSuspected,
  DegenerateWindow,
  OutOfRange,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularWeight: return "SingularWeight";
    case ErrorCode::NonSymmetric: return "NonSymmetric";
    case ErrorCode::NotEquilibrium: return "NotEquilibrium";
    case ErrorCode::InvalidMargin: return "InvalidMargin";
    case ErrorCode::WeightNotPositive: return "WeightNotPositive";
    case ErrorCode::CannotCertify: return "CannotCertify";
    case ErrorCode::UnresolvedBand: return "UnresolvedBand";
    case ErrorCode::SingularBlock: return "SingularBlock";
    case ErrorCode::InvalidGamma: return "InvalidGamma";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::CoefficientSingular: return "CoefficientSingular";
    case ErrorCode::BlowupSuspected: return "BlowupSuspected";
    case ErrorCode::DegenerateWindow: return "DegenerateWindow";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hypocoax
