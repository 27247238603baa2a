#ifndef SHIFTBOUND_BOUND_ESTIMATE_H_
#define SHIFTBOUND_BOUND_ESTIMATE_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "shiftbound/problem.h"

namespace shiftbound {

enum class BoundStatus { kOptimal, kInfeasible, kUnbounded, kDegenerate, kFailed };

std::string_view BoundStatusName(BoundStatus status);

struct SolveDiagnostics {
  BoundStatus status = BoundStatus::kOptimal;
  std::string solver;  // "simplex", "charnes-cooper", "augmented-lagrangian"
  std::string message;
  int pivot_count = 0;
  int outer_iterations = 0;
  double constraint_violation = 0.0;
  // max - min of feasible values across restarts (0 for exact solvers).
  double restart_spread = 0.0;
  std::vector<double> restart_values;
  // Sign applied to -M H^-1 grad h when an inner argmin is differentiated;
  // 0 when no hypergradient was used.
  int hypergradient_sign = 0;
  bool variance_available = true;
  std::vector<std::string> warnings;
};

// One side of a partial-identification bound.
struct BoundEstimate {
  Side side = Side::kLower;
  double value = 0.0;
  Eigen::VectorXd alpha_star;
  Eigen::VectorXd theta_star;  // per stratum
  // Sensitivities d value / d target_j, aligned with ProblemSpec::constraints
  // (zero for covariance-sign restrictions).
  Eigen::VectorXd duals;
  double sigma2 = 0.0;  // variance of sqrt(N) (value_hat - value)
  std::size_t n = 0;
  double ci_level = 0.95;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  SolveDiagnostics diagnostics;

  bool ok() const { return diagnostics.status == BoundStatus::kOptimal; }
};

}  // namespace shiftbound

#endif  // SHIFTBOUND_BOUND_ESTIMATE_H_
