#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lingermort {

enum class ErrorCode {
  // input validation
  MissingCell,
  InconsistentExposure,
  NonPositiveExposure,
  NegativeDeaths,
  RaggedYears,
  MalformedRow,
  UnknownEra,
  EmptyExport,
  ZeroRate,
  BaselineOutOfRange,
  YearOutOfRange,
  AgeOutOfRange,
  ZeroBaselineRate,
  DimensionMismatch,
  InvalidArgument,
  InvalidScenario,
  UnknownScenario,
  JumpYearMissing,
  NoPostJumpData,
  WindowTooShort,
  HorizonTooShort,
  HorizonExceedsPath,
  SampleTooSmall,
  NonConvergedFit,
  AllZeroAgeRow,
  Io,
  Schema,
  // numerical failures
  SingularCovariance,
  NonFiniteObjective,
  MaxIterations,
  DegenerateTrend,
  DegenerateVariance,
  SingularHessian,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingCell: return "MissingCell";
    case ErrorCode::InconsistentExposure: return "InconsistentExposure";
    case ErrorCode::NonPositiveExposure: return "NonPositiveExposure";
    case ErrorCode::NegativeDeaths: return "NegativeDeaths";
    case ErrorCode::RaggedYears: return "RaggedYears";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::UnknownEra: return "UnknownEra";
    case ErrorCode::EmptyExport: return "EmptyExport";
    case ErrorCode::ZeroRate: return "ZeroRate";
    case ErrorCode::BaselineOutOfRange: return "BaselineOutOfRange";
    case ErrorCode::YearOutOfRange: return "YearOutOfRange";
    case ErrorCode::AgeOutOfRange: return "AgeOutOfRange";
    case ErrorCode::ZeroBaselineRate: return "ZeroBaselineRate";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
    case ErrorCode::JumpYearMissing: return "JumpYearMissing";
    case ErrorCode::NoPostJumpData: return "NoPostJumpData";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::HorizonExceedsPath: return "HorizonExceedsPath";
    case ErrorCode::SampleTooSmall: return "SampleTooSmall";
    case ErrorCode::NonConvergedFit: return "NonConvergedFit";
    case ErrorCode::AllZeroAgeRow: return "AllZeroAgeRow";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Schema: return "Schema";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::DegenerateTrend: return "DegenerateTrend";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::SingularHessian: return "SingularHessian";
  }
  return "Unknown";
}

/// True for failures that come out of the numerics rather than bad input.
constexpr bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularCovariance:
    case ErrorCode::NonFiniteObjective:
    case ErrorCode::MaxIterations:
    case ErrorCode::DegenerateTrend:
    case ErrorCode::DegenerateVariance:
    case ErrorCode::SingularHessian:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

inline void require(bool condition, ErrorCode code, const std::string& detail) {
  if (!condition) throw Error(code, detail);
}

}  // namespace lingermort
