#ifndef SHIFTBOUND_INFERENCE_H_
#define SHIFTBOUND_INFERENCE_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "shiftbound/bound_estimate.h"
#include "shiftbound/m_estimation.h"
#include "shiftbound/problem.h"

namespace shiftbound {

struct SolveOptions;

enum class CiMode { kTwoSided, kLowerOneSided, kUpperOneSided };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool Contains(double v, double slack = 0.0) const { return lo - slack <= v && v <= hi + slack; }
};

double StandardNormalQuantile(double p);

// Sample variance with denominator N - 1. Throws InsufficientSamples.
double SampleVariance(const Eigen::VectorXd& z);

// value -/+ z * sqrt(sigma2 / n). One-sided modes extend only downward
// (lower) or upward (upper) with z at `level`. Throws BadLevel.
Interval NormalCi(double value, double sigma2, std::size_t n, double level,
                  CiMode mode = CiMode::kTwoSided);

// Asymptotic variance of a convex (Mean / ConditionalMean) bound, the sample
// variance of the per-sample influence term
//   Z_i = phi_i + sum_j lambda_j (theta_i g_ij - c_j),
// where phi_i = theta_i h_i for a mean and theta_i 1{C}_i (h_i - v) / D for a
// conditional mean with D = E_Q^[theta 1{C}]. `duals` are value
// sensitivities d v / d c_j (BoundEstimate::duals), so lambda_j = -duals_j.
double VarianceConvex(const ProblemSpec& spec, const PreparedProblem& prep,
                      const Eigen::VectorXd& theta_strata, const Eigen::VectorXd& duals,
                      double value);

// Sandwich covariance H^-1 [(1/N) sum_i w_i^2 g_i g_i^T] H^-1 of a weighted
// M-estimator, where g_i is row i of `per_sample_grad`. Per-observation scale
// (divide by N for the covariance of beta). Throws HessianNotPD.
Eigen::MatrixXd SandwichCov(const FittedM& fit, const Eigen::VectorXd& weights,
                            const Eigen::MatrixXd& per_sample_grad);

// grad_h^T Sigma grad_h + Var(sum_j lambda_j theta_i g_ij). Valid under sample
// splitting; otherwise the cross-covariance is ignored and `covariances_ignored`
// is set (when non-null).
double VarianceMBound(const Eigen::MatrixXd& sandwich, const Eigen::VectorXd& h_grad,
                      const Eigen::VectorXd& theta_samples,
                      const Eigen::MatrixXd& g_samples,  // N x m
                      const Eigen::VectorXd& duals, bool sample_split,
                      bool* covariances_ignored = nullptr);

struct IdentificationInterval {
  BoundEstimate lower;
  BoundEstimate upper;
  Interval outer;
  double level = 0.95;
};

// outer = (lower - z sqrt(s2_lo / N), upper + z sqrt(s2_up / N)) with a
// one-sided z per endpoint. Throws CrossedBounds when upper < lower - tol.
IdentificationInterval MakeIdentificationInterval(const BoundEstimate& lower,
                                                  const BoundEstimate& upper, double level,
                                                  double tol = 1e-6);

// Disjoint folds of near-equal size (sizes differ by at most one), assigned
// by a seeded shuffle. Throws TooManyFolds.
std::vector<Dataset> SampleSplit(const Dataset& ds, std::size_t k, std::uint64_t seed);

// Row indices of a size-N resample with replacement.
std::vector<std::size_t> BootstrapIndices(std::size_t n, std::uint64_t seed);

struct EndpointSummary {
  double mean = 0.0;
  double std = 0.0;
  double p_lo = 0.0;  // 2.5th percentile
  double p_hi = 0.0;  // 97.5th percentile
};

struct BootstrapResult {
  std::vector<IdentificationInterval> replicates;  // feasible replicates only
  std::vector<std::size_t> replicate_ids;          // index of each feasible replicate
  std::size_t infeasible = 0;
  EndpointSummary lower;
  EndpointSummary upper;
};

EndpointSummary Summarize(const std::vector<double>& values);

// B row-resamples of spec.dataset (seed + b for replicate b), each re-solved
// on both sides. Infeasible replicates are counted and skipped. Throws
// AllReplicatesInfeasible.
BootstrapResult BootstrapBounds(const ProblemSpec& spec, std::size_t replicates,
                                std::uint64_t seed, const SolveOptions& options);

}  // namespace shiftbound

#endif  // SHIFTBOUND_INFERENCE_H_
