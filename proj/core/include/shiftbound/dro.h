#ifndef SHIFTBOUND_DRO_H_
#define SHIFTBOUND_DRO_H_

#include <span>

#include <Eigen/Dense>

#include "shiftbound/bilevel.h"
#include "shiftbound/problem.h"

namespace shiftbound {

// sum_s q_s (p_s / q_s - 1)^2, the chi-square divergence of p from the
// reference q. Throws SupportViolation when p puts mass where q has none,
// OutOfRange when either vector is not a distribution.
double Chi2Divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

struct DroSpec {
  Eigen::VectorXd h;        // per atom
  Eigen::VectorXd weights;  // reference distribution w
  double rho = 0.0;
  Side side = Side::kLower;
};

struct DroSolution {
  double value = 0.0;
  Eigen::VectorXd p;
};

// opt_p sum p_s h_s  s.t.  p a distribution, Chi2Divergence(p, w) <= rho.
// Throws NegativeRho.
DroSolution DroMeanBound(const DroSpec& spec);

// Conditional mean sum p m1 / sum p m0 over the same ball, by Dinkelbach
// iterations on the mean bound. Throws NegativeRho, ZeroMass.
DroSolution DroConditionalBound(const Eigen::VectorXd& m1, const Eigen::VectorXd& m0,
                                const Eigen::VectorXd& weights, double rho, Side side);

struct RhoEstimate {
  double rho = 0.0;
  Eigen::VectorXd theta;  // maximizing stratum ratios
  double spread = 0.0;
};

// Largest chi-square distance from the empirical stratum weights to a
// reweighting in the feasible set of `spec` (constraints and floor), by
// multiplier-method ascent with restarts. `extra_starts` are ratio-model
// parameter vectors added to the perturbed uniform starts. Throws
// NoFeasiblePointFound.
RhoEstimate RhoObservable(const ProblemSpec& spec, const SolverSettings& settings,
                          std::span<const Eigen::VectorXd> extra_starts = {});

// Lower and upper DRO bound for a Mean or ConditionalMean estimand of `spec`
// over stratum weights. Throws UnsupportedEstimand for other estimands.
struct DroInterval {
  double lower = 0.0;
  double upper = 0.0;
};
DroInterval DroBounds(const ProblemSpec& spec, double rho);

}  // namespace shiftbound

#endif  // SHIFTBOUND_DRO_H_
