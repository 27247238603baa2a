#ifndef SHIFTBOUND_SIMPLEX_H_
#define SHIFTBOUND_SIMPLEX_H_

#include <string_view>

#include <Eigen/Dense>

namespace shiftbound {

enum class LPSense { kMinimize, kMaximize };
enum class LPStatus { kOptimal, kInfeasible, kUnbounded };

std::string_view LPStatusName(LPStatus status);

// optimize  objective . x   s.t.  a_eq x = b_eq,  x >= lower  (lower finite).
struct LinearProgram {
  Eigen::VectorXd objective;
  Eigen::MatrixXd a_eq;
  Eigen::VectorXd b_eq;
  Eigen::VectorXd lower;
  LPSense sense = LPSense::kMinimize;

  // Throws DimensionMismatch / OutOfRange on inconsistent shapes or
  // non-finite bounds.
  void Validate() const;
};

struct LPSolution {
  LPStatus status = LPStatus::kInfeasible;
  double value = 0.0;
  Eigen::VectorXd primal;
  // One multiplier per equality row, in the convention
  //   value = b_eq . duals + reduced_costs . lower,
  //   reduced_costs = objective - a_eq^T duals,
  // for both senses (reduced costs are >= 0 at a minimum, <= 0 at a maximum).
  Eigen::VectorXd duals;
  Eigen::VectorXd reduced_costs;
  int pivot_count = 0;
};

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-10;
  double pivot_tol = 1e-9;
  // Dantzig pricing switches to Bland's rule after this many pivots in a
  // phase (0 = 10 * (rows + cols)).
  int bland_after = 0;
  // Hard cap over both phases (0 = 200 * (rows + cols) + 1000).
  int max_pivots = 0;
};

// Dense two-phase revised simplex. Infeasible and unbounded problems are
// reported through `status`; exceeding the pivot cap throws
// CycleLimitExceeded. Redundant equality rows are tolerated.
LPSolution SimplexSolve(const LinearProgram& lp, const SimplexOptions& options = {});

}  // namespace shiftbound

#endif  // SHIFTBOUND_SIMPLEX_H_
