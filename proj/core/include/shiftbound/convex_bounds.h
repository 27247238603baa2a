#ifndef SHIFTBOUND_CONVEX_BOUNDS_H_
#define SHIFTBOUND_CONVEX_BOUNDS_H_

#include <cstddef>

#include <Eigen/Dense>

#include "shiftbound/bound_estimate.h"
#include "shiftbound/problem.h"
#include "shiftbound/simplex.h"

namespace shiftbound {

struct ConvexOptions {
  SimplexOptions simplex;
  // Lower bound on the Charnes-Cooper scale variable; excludes the t = 0 ray.
  double t_min = 1e-9;
  double ci_level = 0.95;
};

// An LP over the ratio-model parameters together with the bookkeeping needed
// to map its solution back. Box models use alpha directly with per-parameter
// lower bounds. LinearBasis models split alpha = alpha_plus - alpha_minus and
// add one slack row per stratum for theta_s >= floor.
struct ModelLp {
  LinearProgram lp;
  std::size_t moment_rows = 0;  // leading equality rows, one per moment constraint
  std::size_t dim = 0;          // ratio-model dimension d
  bool split = false;

  Eigen::VectorXd AlphaFromPrimal(const Eigen::VectorXd& primal) const;
};

// Plug-in LP for a Mean estimand: optimize (1/N) sum_i theta(X_i) h(X_i)
// subject to the moment equalities and the floor, at stratum level.
ModelLp BuildMeanLp(const ProblemSpec& spec, const PreparedProblem& prep);

// Whether some parameter vector meets the moment equalities and the floor.
// Covariance-sign restrictions are ignored, so false proves infeasibility.
bool HasFeasibleRatio(const PreparedProblem& prep, const SimplexOptions& options = {});

// Moment-constraint duals aligned with spec.constraints. Throws NotOptimal.
Eigen::VectorXd ExtractDuals(const LPSolution& sol, const ProblemSpec& spec,
                             const PreparedProblem& prep);

BoundEstimate MeanBound(const ProblemSpec& spec, const ConvexOptions& options = {});

// Linear-fractional bound on E[h | C] via the Charnes-Cooper change of
// variables y = t * alpha, t = 1 / E_Q^[theta 1{C}].
// Throws EmptyConditionSet, DegenerateT.
BoundEstimate ConditionalMeanBound(const ProblemSpec& spec, const ConvexOptions& options = {});

// Dispatches on the estimand (Mean or ConditionalMean). Throws
// UnsupportedEstimand for the others.
BoundEstimate ConvexBound(const ProblemSpec& spec, const ConvexOptions& options = {});

}  // namespace shiftbound

#endif  // SHIFTBOUND_CONVEX_BOUNDS_H_
