#ifndef SHIFTBOUND_BILEVEL_H_
#define SHIFTBOUND_BILEVEL_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shiftbound/bound_estimate.h"
#include "shiftbound/m_estimation.h"
#include "shiftbound/problem.h"

namespace shiftbound {

struct SolverSettings {
  double step_size = 0.05;  // first projected-gradient step; later steps are spectral
  int max_outer_iters = 80;
  int max_inner_iters = 3000;
  double inner_tol = 1e-10;  // M-estimation gradient tolerance
  double grad_tol = 1e-8;    // final projected-gradient stationarity
  double penalty_mu = 10.0;
  double mu_growth = 2.0;
  double mu_max = 1e6;
  int restarts = 5;
  std::uint64_t seed = 0;
  double constraint_tol = 1e-5;
  double init_perturbation = 0.1;
  bool parallel_restarts = true;

  void Validate() const;
};

// (k, j) = (1/N) sum_s J(k, s) G(s, j), where G(s, .) sums grad_beta m over
// the samples of stratum s. J is the d x S ratio Jacobian.
Eigen::MatrixXd MixedSecond(const Eigen::MatrixXd& theta_jacobian,
                            const Eigen::MatrixXd& stratum_grad_sums, double n);

// Per-sample form: row i of `per_sample_grad` is grad_beta m(x_i, beta*).
Eigen::MatrixXd MixedSecond(const FittedM& fit, const Eigen::MatrixXd& theta_jacobian,
                            const StratumTable& strata, const Eigen::MatrixXd& per_sample_grad);

// Gradient of alpha -> h(beta*(theta_alpha)) by the implicit function theorem
// applied to grad_beta R(beta, alpha) = 0:  -M H^-1 grad_h.
// Throws HessianNotPD.
Eigen::VectorXd Hypergradient(const Eigen::MatrixXd& mixed, const FittedM& fit,
                              const Eigen::VectorXd& h_grad);

// Sign applied in Hypergradient, recorded in diagnostics.
inline constexpr int kHypergradientSign = -1;

struct ValueAndGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;  // per stratum
};

// Discrete average treatment effect of the theta-reweighted sample:
//   sum_x p(x) [p(Y=1 | A=1, x) - p(Y=1 | A=0, x)],
// with cells formed from reweighted stratum counts. The stratum key must
// contain y, a and x columns. Throws EmptyCell, ZeroMass.
ValueAndGradient AteValue(const Eigen::VectorXd& theta, const Dataset& ds,
                          const StratumTable& strata, const Estimand& estimand);

struct CovarianceTerm {
  Eigen::VectorXd weights;  // w_s
  Eigen::VectorXd u_mean;   // per-stratum means of u, v and u*v
  Eigen::VectorXd v_mean;
  Eigen::VectorXd uv_mean;
  int sign = +1;

  static CovarianceTerm Build(const std::string& u, const std::string& v, int sign,
                              const StratumTable& strata, const Dataset& ds);
  double Covariance(const Eigen::VectorXd& theta) const;
};

// max(0, -sign * Cov_theta(u, v))^2 and its gradient in theta, with
// E_theta[z] = sum_s w_s theta_s zbar_s. Throws UnknownColumn.
ValueAndGradient CovarianceSignPenalty(const Eigen::VectorXd& theta, const std::string& u,
                                       const std::string& v, int sign,
                                       const StratumTable& strata, const Dataset& ds);
ValueAndGradient CovarianceSignPenalty(const CovarianceTerm& term, const Eigen::VectorXd& theta);

// A smooth function of the per-stratum ratio vector. Implementations may keep
// warm-start state, so each restart gets its own instance. Evaluate may throw
// `Error` at points where the objective is undefined.
class ThetaObjective {
 public:
  virtual ~ThetaObjective() = default;
  virtual ValueAndGradient Evaluate(const Eigen::VectorXd& theta) = 0;
};

using ObjectiveFactory = std::function<std::unique_ptr<ThetaObjective>()>;

// min_alpha  F(theta(alpha))  s.t.  C alpha = b,  floor,  covariance signs,
// solved by the method of multipliers with a projected spectral-gradient
// inner loop.
struct AlProblem {
  const RatioModel* model = nullptr;
  Eigen::MatrixXd constraint_matrix;  // m x d
  Eigen::VectorXd targets;            // m
  std::vector<CovarianceTerm> covariance_terms;
  ObjectiveFactory objective;
};

struct AlRun {
  Eigen::VectorXd alpha;
  double value = 0.0;
  Eigen::VectorXd multipliers;  // lambda in F + lambda^T (C alpha - b)
  double violation = 0.0;
  bool feasible = false;
  int outer_iterations = 0;
  std::string failure;
};

struct AlResult {
  std::vector<AlRun> runs;
  int best = -1;  // index of the best feasible run
};

// Runs settings.restarts perturbed starts (plus any extra starts) and keeps
// the lowest feasible objective.
AlResult AugmentedLagrangian(const AlProblem& problem, const SolverSettings& settings,
                             std::span<const Eigen::VectorXd> extra_starts = {});

// Builds the objective of `spec` (sign-adjusted so that the solver always
// minimizes) over the prepared stratum table.
ObjectiveFactory MakeEstimandObjective(const ProblemSpec& spec, const PreparedProblem& prep,
                                       const SolverSettings& settings);

// General bound by the augmented-Lagrangian solver. Throws
// NoFeasiblePointFound when every restart ends infeasible.
BoundEstimate SolveNonconvexBound(const ProblemSpec& spec, const SolverSettings& settings,
                                  double ci_level = 0.95, bool sample_split_variance = false,
                                  const Eigen::VectorXd* warm_start = nullptr);

}  // namespace shiftbound

#endif  // SHIFTBOUND_BILEVEL_H_
