#include "shiftbound/solve.h"

#include <future>
#include <limits>

#include "shiftbound/error.h"

namespace shiftbound {

bool UsesLp(const ProblemSpec& spec, const SolveOptions& options) {
  if (options.path == SolvePath::kLp) return true;
  if (options.path == SolvePath::kAugmentedLagrangian) return false;
  const auto kind = spec.estimand.kind;
  if (kind != Estimand::Kind::kMean && kind != Estimand::Kind::kConditionalMean) return false;
  for (const auto& c : spec.constraints) {
    if (c.kind == MomentConstraint::Kind::kCovarianceSign) return false;
  }
  return true;
}

BoundEstimate SolveBound(const ProblemSpec& spec, const SolveOptions& options,
                         const Eigen::VectorXd* warm_start) {
  auto failed = [&](BoundStatus status, const Error& e) {
    BoundEstimate be;
    be.side = spec.side;
    be.value = std::numeric_limits<double>::quiet_NaN();
    be.ci_lo = be.ci_hi = be.value;
    be.n = spec.dataset.rows();
    be.duals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.constraints.size()));
    be.diagnostics.status = status;
    be.diagnostics.message = e.what();
    be.diagnostics.variance_available = false;
    return be;
  };
  try {
    if (UsesLp(spec, options)) {
      ConvexOptions convex = options.convex;
      convex.ci_level = options.ci_level;
      return ConvexBound(spec, convex);
    }
    return SolveNonconvexBound(spec, options.al, options.ci_level, options.mbound_sample_split,
                               warm_start);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kNoFeasiblePointFound: return failed(BoundStatus::kInfeasible, e);
      case ErrorCode::kDegenerateT: return failed(BoundStatus::kDegenerate, e);
      case ErrorCode::kCycleLimitExceeded:
      case ErrorCode::kSingularDesign:
      case ErrorCode::kSeparation:
      case ErrorCode::kHessianNotPD:
      case ErrorCode::kInnerDivergence:
      case ErrorCode::kEmptyCell:
      case ErrorCode::kZeroMass: return failed(BoundStatus::kFailed, e);
      default: throw;
    }
  }
}

IdentificationInterval SolveInterval(const ProblemSpec& spec, const SolveOptions& options) {
  auto upper = std::async(std::launch::async,
                          [&] { return SolveBound(spec.WithSide(Side::kUpper), options); });
  BoundEstimate lo = SolveBound(spec.WithSide(Side::kLower), options);
  BoundEstimate up = upper.get();
  if (!lo.ok() || !up.ok()) {
    IdentificationInterval out{lo, up, {}, options.ci_level};
    out.outer.lo = out.outer.hi = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  return MakeIdentificationInterval(lo, up, options.ci_level);
}

}  // namespace shiftbound
