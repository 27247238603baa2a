#include "shiftbound/m_estimation.h"

#include <cmath>

#include "shiftbound/error.h"

namespace shiftbound {
namespace {

constexpr double kConditioningFloor = 1e-10;

double Softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void CheckShapes(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  if (x.rows() != y.size() || x.rows() != w.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "design, outcome and weights disagree in length");
  }
  if (x.rows() == 0 || x.cols() == 0) throw Error(ErrorCode::kSingularDesign, "empty design");
  if ((w.array() < 0).any()) throw Error(ErrorCode::kOutOfRange, "weights must be nonnegative");
  if (w.sum() <= 0) throw Error(ErrorCode::kSingularDesign, "all weights are zero");
}

// Ratio of extreme eigenvalues of a symmetric PSD matrix.
double Conditioning(const Eigen::MatrixXd& m, double* max_eig = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double hi = es.eigenvalues().maxCoeff();
  const double lo = es.eigenvalues().minCoeff();
  if (max_eig) *max_eig = hi;
  return hi > 0 ? lo / hi : 0.0;
}

}  // namespace

FittedM WeightedOls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    double normalizer) {
  CheckShapes(x, y, w);
  const double n = normalizer > 0 ? normalizer : static_cast<double>(x.rows());
  Eigen::MatrixXd gram = x.transpose() * w.asDiagonal() * x / n;
  if (Conditioning(gram) < kConditioningFloor) {
    throw Error(ErrorCode::kSingularDesign, "weighted Gram matrix is rank deficient");
  }
  Eigen::VectorXd rhs = x.transpose() * w.cwiseProduct(y) / n;
  FittedM fit;
  fit.family = MFamily::kLinear;
  fit.beta = gram.ldlt().solve(rhs);
  fit.hessian = 2.0 * gram;
  fit.converged = true;
  fit.iterations = 1;
  Eigen::VectorXd resid = x * fit.beta - y;
  fit.final_grad_norm = (2.0 / n * (x.transpose() * w.cwiseProduct(resid))).norm();
  return fit;
}

FittedM WeightedLogistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& w, double normalizer,
                         const LogisticOptions& options, const Eigen::VectorXd* start) {
  CheckShapes(x, y, w);
  const double n = normalizer > 0 ? normalizer : static_cast<double>(x.rows());
  double gram_max = 0.0;
  Eigen::MatrixXd gram = x.transpose() * w.asDiagonal() * x / n;
  if (Conditioning(gram, &gram_max) < kConditioningFloor) {
    throw Error(ErrorCode::kSingularDesign, "weighted Gram matrix is rank deficient");
  }

  FittedM fit;
  fit.family = MFamily::kLogistic;
  fit.beta = (start && start->size() == x.cols()) ? *start : Eigen::VectorXd::Zero(x.cols());
  auto risk = [&](const Eigen::VectorXd& b) {
    return WeightedRisk(MFamily::kLogistic, x, y, w, b, n);
  };
  double current = risk(fit.beta);
  for (int it = 0; it < options.max_iterations; ++it) {
    Eigen::VectorXd z = x * fit.beta;
    Eigen::VectorXd p(z.size()), curv(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      p[i] = Sigmoid(z[i]);
      curv[i] = w[i] * p[i] * (1.0 - p[i]);
    }
    Eigen::VectorXd grad = x.transpose() * w.cwiseProduct(p - y) / n;
    fit.hessian = x.transpose() * curv.asDiagonal() * x / n;
    fit.final_grad_norm = grad.norm();
    fit.iterations = it;
    if (fit.final_grad_norm <= options.tol * std::max(1.0, fit.beta.norm())) {
      fit.converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(fit.hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw Error(ErrorCode::kHessianNotPD, "logistic Hessian is not positive definite");
    }
    Eigen::VectorXd step = ldlt.solve(grad);
    double t = 1.0;
    Eigen::VectorXd next;
    double next_risk = 0.0;
    // Near the optimum the predicted decrease is below the resolution of the
    // risk, so the Armijo test is meaningless and the full step is taken.
    const bool in_noise = grad.dot(step) <= 1e-13 * std::max(1.0, std::abs(current));
    for (int ls = 0; ls < 60; ++ls) {
      next = fit.beta - t * step;
      next_risk = risk(next);
      if (in_noise || next_risk <= current - 1e-4 * t * grad.dot(step) || ls == 59) break;
      t *= 0.5;
    }
    if (!std::isfinite(next_risk)) throw Error(ErrorCode::kInnerDivergence, "non-finite risk");
    fit.beta = next;
    current = next_risk;
    if (fit.beta.norm() > options.divergence_norm) {
      throw Error(ErrorCode::kSeparation, "coefficients diverge; classes appear separable");
    }
  }
  if (!fit.converged) {
    throw Error(ErrorCode::kInnerDivergence, "logistic Newton iterations did not converge");
  }
  // Under separation the risk flattens and the Fisher information collapses
  // relative to the Gram matrix long before beta hits the norm guard.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.hessian, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < 1e-9 * gram_max) {
    throw Error(ErrorCode::kSeparation, "Fisher information is degenerate; classes separable");
  }
  return fit;
}

FittedM FitM(MFamily family, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
             const Eigen::VectorXd& w, double normalizer, const Eigen::VectorXd* start) {
  if (family == MFamily::kLinear) return WeightedOls(x, y, w, normalizer);
  return WeightedLogistic(x, y, w, normalizer, LogisticOptions{}, start);
}

Eigen::MatrixXd PerSampleGradient(MFamily family, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  Eigen::VectorXd z = x * beta;
  Eigen::VectorXd scale(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    scale[i] = family == MFamily::kLinear ? -2.0 * (y[i] - z[i]) : Sigmoid(z[i]) - y[i];
  }
  return scale.asDiagonal() * x;
}

double WeightedRisk(MFamily family, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& w, const Eigen::VectorXd& beta, double normalizer) {
  const double n = normalizer > 0 ? normalizer : static_cast<double>(x.rows());
  Eigen::VectorXd z = x * beta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double m = family == MFamily::kLinear ? (y[i] - z[i]) * (y[i] - z[i])
                                                : Softplus(z[i]) - y[i] * z[i];
    total += w[i] * m;
  }
  return total / n;
}

}  // namespace shiftbound
