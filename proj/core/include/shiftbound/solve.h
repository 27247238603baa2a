#ifndef SHIFTBOUND_SOLVE_H_
#define SHIFTBOUND_SOLVE_H_

#include "shiftbound/bilevel.h"
#include "shiftbound/bound_estimate.h"
#include "shiftbound/convex_bounds.h"
#include "shiftbound/inference.h"
#include "shiftbound/problem.h"

namespace shiftbound {

enum class SolvePath { kAuto, kLp, kAugmentedLagrangian };

struct SolveOptions {
  // kAuto takes the LP for Mean / ConditionalMean without covariance-sign
  // restrictions and the augmented Lagrangian otherwise.
  SolvePath path = SolvePath::kAuto;
  ConvexOptions convex;
  SolverSettings al;
  double ci_level = 0.95;
  // Fit the M-estimator and the constraint term on disjoint halves when
  // estimating the variance of an M-coefficient bound.
  bool mbound_sample_split = false;
};

bool UsesLp(const ProblemSpec& spec, const SolveOptions& options);

// One side. Infeasible or unbounded problems come back with the matching
// status rather than as exceptions.
BoundEstimate SolveBound(const ProblemSpec& spec, const SolveOptions& options = {},
                         const Eigen::VectorXd* warm_start = nullptr);

// Both sides plus the outer confidence interval. Throws CrossedBounds.
IdentificationInterval SolveInterval(const ProblemSpec& spec, const SolveOptions& options = {});

}  // namespace shiftbound

#endif  // SHIFTBOUND_SOLVE_H_
