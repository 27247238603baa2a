#include "shiftbound/inference.h"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <optional>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "shiftbound/error.h"
#include "shiftbound/solve.h"

namespace shiftbound {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double StandardNormalQuantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::kBadLevel, "quantile needs p in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

double SampleVariance(const VectorXd& z) {
  if (z.size() < 2) throw Error(ErrorCode::kInsufficientSamples, "variance needs N >= 2");
  const double mean = z.mean();
  return (z.array() - mean).square().sum() / static_cast<double>(z.size() - 1);
}

Interval NormalCi(double value, double sigma2, std::size_t n, double level, CiMode mode) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::kBadLevel, "level must be in (0,1)");
  if (!(sigma2 >= 0.0)) throw Error(ErrorCode::kOutOfRange, "variance must be nonnegative");
  if (n == 0) throw Error(ErrorCode::kInsufficientSamples, "N must be positive");
  const double se = std::sqrt(sigma2 / static_cast<double>(n));
  switch (mode) {
    case CiMode::kTwoSided: {
      const double half = StandardNormalQuantile(0.5 * (1.0 + level)) * se;
      return {value - half, value + half};
    }
    case CiMode::kLowerOneSided: return {value - StandardNormalQuantile(level) * se, value};
    case CiMode::kUpperOneSided: return {value, value + StandardNormalQuantile(level) * se};
  }
  return {value, value};
}

double VarianceConvex(const ProblemSpec& spec, const PreparedProblem& prep,
                      const VectorXd& theta_strata, const VectorXd& duals, double value) {
  const Dataset& ds = spec.dataset;
  VectorXd theta = prep.strata.Expand(theta_strata);
  VectorXd z(theta.size());
  const auto& est = spec.estimand;
  if (est.kind == Estimand::Kind::kMean) {
    z = theta.cwiseProduct(EvalExpr(est.h, ds));
  } else if (est.kind == Estimand::Kind::kConditionalMean) {
    VectorXd cond = EvalExpr(est.condition, ds);
    VectorXd tc = theta.cwiseProduct(cond);
    const double denom = tc.mean();
    if (!(denom > 0.0)) throw Error(ErrorCode::kZeroMass, "reweighted condition mass is zero");
    z = tc.cwiseProduct((EvalExpr(est.h, ds).array() - value).matrix()) / denom;
  } else {
    throw Error(ErrorCode::kUnsupportedEstimand, "convex variance needs a (conditional) mean");
  }
  for (std::size_t j = 0; j < spec.constraints.size(); ++j) {
    const auto& c = spec.constraints[j];
    const double pi = duals.size() ? duals[static_cast<Index>(j)] : 0.0;
    if (c.kind != MomentConstraint::Kind::kMomentEquality || pi == 0.0) continue;
    z -= pi * (theta.cwiseProduct(EvalExpr(c.expr, ds)).array() - c.target).matrix();
  }
  return SampleVariance(z);
}

MatrixXd SandwichCov(const FittedM& fit, const VectorXd& weights, const MatrixXd& per_sample_grad) {
  if (weights.size() != per_sample_grad.rows() || per_sample_grad.cols() != fit.hessian.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "sandwich inputs disagree in shape");
  }
  Eigen::LLT<MatrixXd> llt(fit.hessian);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kHessianNotPD, "M-estimation Hessian is not positive definite");
  }
  const double n = static_cast<double>(per_sample_grad.rows());
  MatrixXd scaled = weights.asDiagonal() * per_sample_grad;
  MatrixXd meat = scaled.transpose() * scaled / n;
  MatrixXd hinv = llt.solve(MatrixXd::Identity(fit.hessian.rows(), fit.hessian.cols()));
  MatrixXd out = hinv * meat * hinv;
  return 0.5 * (out + out.transpose());
}

double VarianceMBound(const MatrixXd& sandwich, const VectorXd& h_grad,
                      const VectorXd& theta_samples, const MatrixXd& g_samples,
                      const VectorXd& duals, bool sample_split, bool* covariances_ignored) {
  if (sandwich.rows() != h_grad.size() || g_samples.cols() != duals.size() ||
      g_samples.rows() != theta_samples.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "variance inputs disagree in shape");
  }
  double out = h_grad.dot(sandwich * h_grad);
  if (duals.size() > 0 && duals.cwiseAbs().maxCoeff() > 0.0) {
    VectorXd term = theta_samples.cwiseProduct(g_samples * duals);
    out += SampleVariance(term);
  }
  if (covariances_ignored) *covariances_ignored = !sample_split;
  return std::max(out, 0.0);
}

IdentificationInterval MakeIdentificationInterval(const BoundEstimate& lower,
                                                  const BoundEstimate& upper, double level,
                                                  double tol) {
  if (upper.value < lower.value - tol) {
    throw Error(ErrorCode::kCrossedBounds, "upper bound " + std::to_string(upper.value) +
                                               " below lower bound " +
                                               std::to_string(lower.value));
  }
  IdentificationInterval out{lower, upper, {}, level};
  out.outer.lo = NormalCi(lower.value, lower.sigma2, lower.n, level, CiMode::kLowerOneSided).lo;
  out.outer.hi = NormalCi(upper.value, upper.sigma2, upper.n, level, CiMode::kUpperOneSided).hi;
  return out;
}

std::vector<Dataset> SampleSplit(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  const std::size_t n = ds.rows();
  if (k == 0 || k > n) throw Error(ErrorCode::kTooManyFolds, "fold count must be in [1, N]");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Dataset> folds;
  folds.reserve(k);
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(start + size));
    std::sort(idx.begin(), idx.end());
    folds.push_back(ds.SelectRows(idx));
    start += size;
  }
  return folds;
}

std::vector<std::size_t> BootstrapIndices(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = pick(rng);
  return out;
}

EndpointSummary Summarize(const std::vector<double>& values) {
  EndpointSummary s;
  if (values.empty()) return s;
  VectorXd v = Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
  if (v.minCoeff() == v.maxCoeff()) {
    s.mean = s.p_lo = s.p_hi = v[0];
    return s;
  }
  s.mean = v.mean();
  s.std = std::sqrt(SampleVariance(v));
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  auto pct = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  s.p_lo = pct(0.025);
  s.p_hi = pct(0.975);
  return s;
}

BootstrapResult BootstrapBounds(const ProblemSpec& spec, std::size_t replicates,
                                std::uint64_t seed, const SolveOptions& options) {
  if (replicates == 0) throw Error(ErrorCode::kOutOfRange, "bootstrap needs B >= 1");
  std::optional<VectorXd> warm_lo, warm_up;
  if (!UsesLp(spec, options)) {
    BoundEstimate lo = SolveBound(spec.WithSide(Side::kLower), options);
    BoundEstimate up = SolveBound(spec.WithSide(Side::kUpper), options);
    if (lo.ok()) warm_lo = lo.alpha_star;
    if (up.ok()) warm_up = up.alpha_star;
  }
  auto run = [&](std::size_t b) -> std::optional<IdentificationInterval> {
    auto idx = BootstrapIndices(spec.dataset.rows(), seed + b);
    ProblemSpec rep = spec.WithDataset(spec.dataset.SelectRows(idx));
    BoundEstimate lo = SolveBound(rep.WithSide(Side::kLower), options,
                                  warm_lo ? &*warm_lo : nullptr);
    BoundEstimate up = SolveBound(rep.WithSide(Side::kUpper), options,
                                  warm_up ? &*warm_up : nullptr);
    if (!lo.ok() || !up.ok()) return std::nullopt;
    try {
      return MakeIdentificationInterval(lo, up, options.ci_level);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  std::vector<std::future<std::optional<IdentificationInterval>>> jobs;
  jobs.reserve(replicates);
  for (std::size_t b = 0; b < replicates; ++b) {
    jobs.push_back(std::async(std::launch::async, run, b));
  }
  BootstrapResult out;
  std::vector<double> lows, ups;
  for (std::size_t b = 0; b < replicates; ++b) {
    auto r = jobs[b].get();
    if (!r) {
      ++out.infeasible;
      continue;
    }
    lows.push_back(r->lower.value);
    ups.push_back(r->upper.value);
    out.replicates.push_back(std::move(*r));
    out.replicate_ids.push_back(b);
  }
  if (out.replicates.empty()) {
    throw Error(ErrorCode::kAllReplicatesInfeasible,
                std::to_string(replicates) + " bootstrap replicates were all infeasible");
  }
  out.lower = Summarize(lows);
  out.upper = Summarize(ups);
  return out;
}

}  // namespace shiftbound
