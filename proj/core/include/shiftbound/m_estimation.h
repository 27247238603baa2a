#ifndef SHIFTBOUND_M_ESTIMATION_H_
#define SHIFTBOUND_M_ESTIMATION_H_

#include <Eigen/Dense>

#include "shiftbound/problem.h"

namespace shiftbound {

// Result of a weighted M-estimation fit. The empirical risk is
//   R(beta) = (1/N) sum_i w_i m(x_i, y_i, beta)
// with m the squared error (linear) or the negative log-likelihood
// (logistic), and `hessian` is the Hessian of R at beta.
struct FittedM {
  MFamily family = MFamily::kLinear;
  Eigen::VectorXd beta;
  Eigen::MatrixXd hessian;
  bool converged = false;
  int iterations = 0;
  double final_grad_norm = 0.0;
};

struct LogisticOptions {
  double tol = 1e-10;  // on ||grad R|| / max(1, ||beta||)
  int max_iterations = 200;
  double divergence_norm = 1e3;
};

// Closed-form weighted least squares. `normalizer` is the N in 1/N (defaults
// to the number of rows). Throws SingularDesign.
FittedM WeightedOls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    double normalizer = 0.0);

// Damped Newton (IRLS) for weighted logistic regression. `y` may hold
// fractional values (group means). Throws SingularDesign, Separation,
// InnerDivergence.
FittedM WeightedLogistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& w, double normalizer = 0.0,
                         const LogisticOptions& options = {},
                         const Eigen::VectorXd* start = nullptr);

FittedM FitM(MFamily family, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
             const Eigen::VectorXd& w, double normalizer = 0.0,
             const Eigen::VectorXd* start = nullptr);

// Row i is grad_beta m(x_i, y_i, beta).
Eigen::MatrixXd PerSampleGradient(MFamily family, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, const Eigen::VectorXd& beta);

// Weighted empirical risk R(beta).
double WeightedRisk(MFamily family, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& w, const Eigen::VectorXd& beta,
                    double normalizer = 0.0);

}  // namespace shiftbound

#endif  // SHIFTBOUND_M_ESTIMATION_H_
