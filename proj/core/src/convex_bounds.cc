#include "shiftbound/convex_bounds.h"

#include <cmath>
#include <limits>

#include "shiftbound/error.h"
#include "shiftbound/inference.h"

namespace shiftbound {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

LPSense SenseOf(Side side) { return side == Side::kLower ? LPSense::kMinimize : LPSense::kMaximize; }

BoundStatus StatusOf(LPStatus s) {
  switch (s) {
    case LPStatus::kOptimal: return BoundStatus::kOptimal;
    case LPStatus::kInfeasible: return BoundStatus::kInfeasible;
    case LPStatus::kUnbounded: return BoundStatus::kUnbounded;
  }
  return BoundStatus::kFailed;
}

BoundEstimate FailedEstimate(const ProblemSpec& spec, const PreparedProblem& prep,
                             const LPSolution& sol, const char* solver) {
  BoundEstimate be;
  be.side = spec.side;
  be.value = std::numeric_limits<double>::quiet_NaN();
  be.n = prep.n();
  be.duals = VectorXd::Zero(static_cast<Index>(spec.constraints.size()));
  be.diagnostics.status = StatusOf(sol.status);
  be.diagnostics.solver = solver;
  be.diagnostics.pivot_count = sol.pivot_count;
  be.diagnostics.message = std::string("LP ") + std::string(LPStatusName(sol.status));
  be.diagnostics.variance_available = false;
  be.ci_lo = be.ci_hi = be.value;
  return be;
}

// Fills value-derived fields shared by both convex bounds.
void Finish(BoundEstimate& be, const ProblemSpec& spec, const PreparedProblem& prep,
            const ConvexOptions& options) {
  be.theta_star = prep.model.Theta(be.alpha_star);
  be.n = prep.n();
  be.diagnostics.constraint_violation =
      prep.targets.size() ? prep.ConstraintResidual(be.alpha_star).cwiseAbs().maxCoeff() : 0.0;
  be.sigma2 = VarianceConvex(spec, prep, be.theta_star, be.duals, be.value);
  be.ci_level = options.ci_level;
  Interval ci = NormalCi(be.value, be.sigma2, be.n, options.ci_level,
                         spec.side == Side::kLower ? CiMode::kLowerOneSided
                                                   : CiMode::kUpperOneSided);
  be.ci_lo = ci.lo;
  be.ci_hi = ci.hi;
}

VectorXd StratumMeans(const Expr& e, const ProblemSpec& spec, const PreparedProblem& prep) {
  return prep.strata.Means(EvalExpr(e, spec.dataset));
}

}  // namespace

VectorXd ModelLp::AlphaFromPrimal(const VectorXd& primal) const {
  const auto d = static_cast<Index>(dim);
  if (split) return primal.head(d) - primal.segment(d, d);
  return primal.head(d);
}

namespace {

// LP over the feasible ratio parameters with objective c . alpha.
ModelLp BuildModelLp(const PreparedProblem& prep, const VectorXd& c, Side side) {
  const MatrixXd& jac = prep.model.jacobian();
  const Index d = jac.rows();
  const Index s = jac.cols();
  const Index m = prep.constraint_matrix.rows();

  ModelLp out;
  out.moment_rows = static_cast<std::size_t>(m);
  out.dim = static_cast<std::size_t>(d);
  out.lp.sense = SenseOf(side);
  if (prep.model.IsBox()) {
    out.lp.objective = c;
    out.lp.a_eq = prep.constraint_matrix;
    out.lp.b_eq = prep.targets;
    out.lp.lower = prep.model.ParamLowerBounds();
    return out;
  }
  // [alpha+, alpha-, slack] with J^T (alpha+ - alpha-) - slack = floor.
  out.split = true;
  const Index n = 2 * d + s;
  out.lp.objective = VectorXd::Zero(n);
  out.lp.objective.head(d) = c;
  out.lp.objective.segment(d, d) = -c;
  out.lp.a_eq = MatrixXd::Zero(m + s, n);
  out.lp.a_eq.block(0, 0, m, d) = prep.constraint_matrix;
  out.lp.a_eq.block(0, d, m, d) = -prep.constraint_matrix;
  out.lp.a_eq.block(m, 0, s, d) = jac.transpose();
  out.lp.a_eq.block(m, d, s, d) = -jac.transpose();
  out.lp.a_eq.block(m, 2 * d, s, s) = -MatrixXd::Identity(s, s);
  out.lp.b_eq.resize(m + s);
  out.lp.b_eq.head(m) = prep.targets;
  out.lp.b_eq.tail(s).setConstant(prep.model.floor());
  out.lp.lower = VectorXd::Zero(n);
  return out;
}

}  // namespace

ModelLp BuildMeanLp(const ProblemSpec& spec, const PreparedProblem& prep) {
  if (spec.estimand.kind != Estimand::Kind::kMean) {
    throw Error(ErrorCode::kUnsupportedEstimand, "mean LP needs a Mean estimand");
  }
  VectorXd hbar = StratumMeans(spec.estimand.h, spec, prep);
  return BuildModelLp(prep, prep.model.jacobian() * prep.weights.cwiseProduct(hbar), spec.side);
}

bool HasFeasibleRatio(const PreparedProblem& prep, const SimplexOptions& options) {
  const VectorXd zero = VectorXd::Zero(prep.model.jacobian().rows());
  return SimplexSolve(BuildModelLp(prep, zero, Side::kLower).lp, options).status !=
         LPStatus::kInfeasible;
}

VectorXd ExtractDuals(const LPSolution& sol, const ProblemSpec& spec, const PreparedProblem& prep) {
  if (sol.status != LPStatus::kOptimal) {
    throw Error(ErrorCode::kNotOptimal, "duals need an optimal LP solution");
  }
  VectorXd out = VectorXd::Zero(static_cast<Index>(spec.constraints.size()));
  for (std::size_t j = 0; j < prep.equality_rows.size(); ++j) {
    out[static_cast<Index>(prep.equality_rows[j])] = sol.duals[static_cast<Index>(j)];
  }
  return out;
}

BoundEstimate MeanBound(const ProblemSpec& spec, const ConvexOptions& options) {
  PreparedProblem prep = Prepare(spec);
  ModelLp model_lp = BuildMeanLp(spec, prep);
  LPSolution sol = SimplexSolve(model_lp.lp, options.simplex);
  if (sol.status != LPStatus::kOptimal) return FailedEstimate(spec, prep, sol, "simplex");

  BoundEstimate be;
  be.side = spec.side;
  be.value = sol.value;
  be.alpha_star = model_lp.AlphaFromPrimal(sol.primal);
  be.duals = ExtractDuals(sol, spec, prep);
  be.diagnostics.solver = "simplex";
  be.diagnostics.pivot_count = sol.pivot_count;
  Finish(be, spec, prep, options);
  return be;
}

BoundEstimate ConditionalMeanBound(const ProblemSpec& spec, const ConvexOptions& options) {
  if (spec.estimand.kind != Estimand::Kind::kConditionalMean) {
    throw Error(ErrorCode::kUnsupportedEstimand, "Charnes-Cooper LP needs a ConditionalMean");
  }
  PreparedProblem prep = Prepare(spec);
  const MatrixXd& jac = prep.model.jacobian();
  const Index d = jac.rows();
  const Index s = jac.cols();
  const Index m = prep.constraint_matrix.rows();
  const Eigen::VectorXd cond = EvalExpr(spec.estimand.condition, spec.dataset);
  if (cond.sum() <= 0.0) {
    throw Error(ErrorCode::kEmptyConditionSet, spec.estimand.condition.ToString());
  }
  VectorXd m0 = prep.strata.Means(cond);
  VectorXd m1 = prep.strata.Means(cond.cwiseProduct(EvalExpr(spec.estimand.h, spec.dataset)));
  VectorXd c1 = jac * prep.weights.cwiseProduct(m1);
  VectorXd a0 = jac * prep.weights.cwiseProduct(m0);
  const MatrixXd& cm = prep.constraint_matrix;

  LinearProgram lp;
  lp.sense = SenseOf(spec.side);
  const bool box = prep.model.IsBox();
  Index n = 0;
  Index t_col = 0;
  if (box) {
    // y = z + lb * t with z >= 0.
    VectorXd lb = prep.model.ParamLowerBounds();
    n = d + 1;
    t_col = d;
    lp.objective.resize(n);
    lp.objective << c1, c1.dot(lb);
    lp.a_eq = MatrixXd::Zero(1 + m, n);
    lp.a_eq.block(0, 0, 1, d) = a0.transpose();
    lp.a_eq(0, t_col) = a0.dot(lb);
    lp.a_eq.block(1, 0, m, d) = cm;
    lp.a_eq.block(1, t_col, m, 1) = cm * lb - prep.targets;
    lp.lower = VectorXd::Zero(n);
  } else {
    // [y+, y-, slack, t] with J^T (y+ - y-) - slack - floor * t = 0.
    n = 2 * d + s + 1;
    t_col = n - 1;
    lp.objective = VectorXd::Zero(n);
    lp.objective.head(d) = c1;
    lp.objective.segment(d, d) = -c1;
    lp.a_eq = MatrixXd::Zero(1 + m + s, n);
    lp.a_eq.block(0, 0, 1, d) = a0.transpose();
    lp.a_eq.block(0, d, 1, d) = -a0.transpose();
    lp.a_eq.block(1, 0, m, d) = cm;
    lp.a_eq.block(1, d, m, d) = -cm;
    lp.a_eq.block(1, t_col, m, 1) = -prep.targets;
    lp.a_eq.block(1 + m, 0, s, d) = jac.transpose();
    lp.a_eq.block(1 + m, d, s, d) = -jac.transpose();
    lp.a_eq.block(1 + m, 2 * d, s, s) = -MatrixXd::Identity(s, s);
    lp.a_eq.block(1 + m, t_col, s, 1).setConstant(-prep.model.floor());
    lp.lower = VectorXd::Zero(n);
  }
  lp.b_eq = VectorXd::Zero(lp.a_eq.rows());
  lp.b_eq[0] = 1.0;
  lp.lower[t_col] = options.t_min;

  LPSolution sol = SimplexSolve(lp, options.simplex);
  if (sol.status != LPStatus::kOptimal) return FailedEstimate(spec, prep, sol, "charnes-cooper");
  const double t = sol.primal[t_col];
  if (t <= options.t_min * (1.0 + 1e-6)) {
    throw Error(ErrorCode::kDegenerateT,
                "scale variable at its floor; the reweighted condition mass is unbounded");
  }
  VectorXd y = box ? VectorXd(sol.primal.head(d) + prep.model.ParamLowerBounds() * t)
                   : VectorXd(sol.primal.head(d) - sol.primal.segment(d, d));

  BoundEstimate be;
  be.side = spec.side;
  be.value = sol.value;
  be.alpha_star = y / t;
  // The targets enter as coefficients of t, so d value / d c_j = pi_j * t.
  be.duals = VectorXd::Zero(static_cast<Index>(spec.constraints.size()));
  for (std::size_t j = 0; j < prep.equality_rows.size(); ++j) {
    be.duals[static_cast<Index>(prep.equality_rows[j])] = sol.duals[static_cast<Index>(j) + 1] * t;
  }
  be.diagnostics.solver = "charnes-cooper";
  be.diagnostics.pivot_count = sol.pivot_count;
  Finish(be, spec, prep, options);
  return be;
}

BoundEstimate ConvexBound(const ProblemSpec& spec, const ConvexOptions& options) {
  for (const auto& c : spec.constraints) {
    if (c.kind == MomentConstraint::Kind::kCovarianceSign) {
      throw Error(ErrorCode::kUnsupportedEstimand,
                  "covariance-sign restrictions need the augmented-Lagrangian solver");
    }
  }
  switch (spec.estimand.kind) {
    case Estimand::Kind::kMean: return MeanBound(spec, options);
    case Estimand::Kind::kConditionalMean: return ConditionalMeanBound(spec, options);
    default:
      throw Error(ErrorCode::kUnsupportedEstimand,
                  spec.estimand.Describe() + " has no linear-programming form");
  }
}

}  // namespace shiftbound
