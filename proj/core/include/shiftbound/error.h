#ifndef SHIFTBOUND_ERROR_H_
#define SHIFTBOUND_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace shiftbound {

enum class ErrorCode {
  // Ingestion and data model.
  kMissingValue,
  kUnknownColumn,
  kNonIntegerDiscrete,
  kContinuousColumnInKey,
  kOutOfRange,
  kParseError,
  kDatasetError,
  // Ratio models.
  kNoConstantBasis,
  kDimensionMismatch,
  kUnsupportedForBasis,
  // Linear programming.
  kEmptyStratumKey,
  kNonLinearModel,
  kEmptyConditionSet,
  kDegenerateT,
  kNotOptimal,
  kCycleLimitExceeded,
  // M-estimation and bilevel solves.
  kSingularDesign,
  kSeparation,
  kHessianNotPD,
  kNoFeasiblePointFound,
  kInnerDivergence,
  kEmptyCell,
  kZeroMass,
  kUnsupportedEstimand,
  // Inference.
  kInsufficientSamples,
  kBadLevel,
  kCrossedBounds,
  kAllReplicatesInfeasible,
  kTooManyFolds,
  // DRO.
  kSupportViolation,
  kNegativeRho,
  // Harness.
  kContinuousSupport,
  kConfigSchemaError,
  kEmptyBundle,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures surface as this exception; `code()` identifies the
// failure class so callers (bootstrap loops, the CLI) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace shiftbound

#endif  // SHIFTBOUND_ERROR_H_
