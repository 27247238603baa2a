#include "shiftbound/error.h"

namespace shiftbound {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingValue: return "MissingValue";
    case ErrorCode::kUnknownColumn: return "UnknownColumn";
    case ErrorCode::kNonIntegerDiscrete: return "NonIntegerDiscrete";
    case ErrorCode::kContinuousColumnInKey: return "ContinuousColumnInKey";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDatasetError: return "DatasetError";
    case ErrorCode::kNoConstantBasis: return "NoConstantBasis";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kUnsupportedForBasis: return "UnsupportedForBasis";
    case ErrorCode::kEmptyStratumKey: return "EmptyStratumKey";
    case ErrorCode::kNonLinearModel: return "NonLinearModel";
    case ErrorCode::kEmptyConditionSet: return "EmptyConditionSet";
    case ErrorCode::kDegenerateT: return "DegenerateT";
    case ErrorCode::kNotOptimal: return "NotOptimal";
    case ErrorCode::kCycleLimitExceeded: return "CycleLimitExceeded";
    case ErrorCode::kSingularDesign: return "SingularDesign";
    case ErrorCode::kSeparation: return "Separation";
    case ErrorCode::kHessianNotPD: return "HessianNotPD";
    case ErrorCode::kNoFeasiblePointFound: return "NoFeasiblePointFound";
    case ErrorCode::kInnerDivergence: return "InnerDivergence";
    case ErrorCode::kEmptyCell: return "EmptyCell";
    case ErrorCode::kZeroMass: return "ZeroMass";
    case ErrorCode::kUnsupportedEstimand: return "UnsupportedEstimand";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kBadLevel: return "BadLevel";
    case ErrorCode::kCrossedBounds: return "CrossedBounds";
    case ErrorCode::kAllReplicatesInfeasible: return "AllReplicatesInfeasible";
    case ErrorCode::kTooManyFolds: return "TooManyFolds";
    case ErrorCode::kSupportViolation: return "SupportViolation";
    case ErrorCode::kNegativeRho: return "NegativeRho";
    case ErrorCode::kContinuousSupport: return "ContinuousSupport";
    case ErrorCode::kConfigSchemaError: return "ConfigSchemaError";
    case ErrorCode::kEmptyBundle: return "EmptyBundle";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace shiftbound
