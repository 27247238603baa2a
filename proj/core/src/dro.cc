#include "shiftbound/dro.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shiftbound/convex_bounds.h"
#include "shiftbound/error.h"

namespace shiftbound {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

void RequireDistribution(const VectorXd& v, const char* name) {
  if ((v.array() < -1e-15).any() || std::abs(v.sum() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kOutOfRange, std::string(name) + " is not a probability vector");
  }
}

// p_s = w_s max(0, 1 + kappa (h_s - eta)) with eta set so that sum p = 1.
VectorXd Tilt(const VectorXd& h, const VectorXd& w, double kappa) {
  if (kappa <= 0.0) return w;
  double lo = h.minCoeff(), hi = h.maxCoeff();
  auto mass = [&](double eta) {
    return (w.array() * (1.0 + kappa * (h.array() - eta)).max(0.0)).sum();
  };
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (mass(mid) > 1.0 ? lo : hi) = mid;
  }
  // Exact eta for the active set at the bracket.
  const double eta0 = 0.5 * (lo + hi);
  double sw = 0.0, swh = 0.0;
  for (Index s = 0; s < h.size(); ++s) {
    if (1.0 + kappa * (h[s] - eta0) > 0.0) {
      sw += w[s];
      swh += w[s] * (1.0 + kappa * h[s]);
    }
  }
  const double eta = sw > 0.0 ? (swh - 1.0) / (kappa * sw) : eta0;
  VectorXd p = (w.array() * (1.0 + kappa * (h.array() - eta)).max(0.0)).matrix();
  return p / p.sum();
}

DroSolution MaxMean(const VectorXd& h, const VectorXd& w, double rho) {
  if (rho == 0.0 || h.maxCoeff() - h.minCoeff() <= 0.0) return {w.dot(h), w};
  // Concentrating on the maximizing atoms (in proportion to w) is the
  // unconstrained optimum; it is reachable once rho covers its divergence.
  const double top = h.maxCoeff();
  VectorXd corner = VectorXd::Zero(h.size());
  for (Index s = 0; s < h.size(); ++s) {
    if (h[s] == top) corner[s] = w[s];
  }
  corner /= corner.sum();
  if (rho >= Chi2Divergence(corner, w)) return {top, corner};

  auto div = [&](double kappa) { return Chi2Divergence(Tilt(h, w, kappa), w); };
  double lo = 0.0, hi = 1.0;
  while (div(hi) < rho && hi < 1e300) hi *= 2.0;
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (div(mid) < rho ? lo : hi) = mid;
  }
  VectorXd p = Tilt(h, w, lo);
  return {p.dot(h), p};
}

}  // namespace

double Chi2Divergence(const VectorXd& p, const VectorXd& q) {
  if (p.size() != q.size()) throw Error(ErrorCode::kDimensionMismatch, "p and q differ in size");
  RequireDistribution(p, "p");
  RequireDistribution(q, "q");
  double out = 0.0;
  for (Index s = 0; s < p.size(); ++s) {
    if (q[s] > 0.0) {
      out += (p[s] - q[s]) * (p[s] - q[s]) / q[s];
    } else if (p[s] > 0.0) {
      throw Error(ErrorCode::kSupportViolation,
                  "atom " + std::to_string(s) + " has mass under p but none under q");
    }
  }
  return out;
}

DroSolution DroMeanBound(const DroSpec& spec) {
  if (!(spec.rho >= 0.0)) throw Error(ErrorCode::kNegativeRho, "rho must be nonnegative");
  if (spec.h.size() != spec.weights.size() || spec.h.size() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "h and weights differ in size");
  }
  RequireDistribution(spec.weights, "weights");
  if (spec.side == Side::kUpper) return MaxMean(spec.h, spec.weights, spec.rho);
  DroSolution s = MaxMean(-spec.h, spec.weights, spec.rho);
  s.value = -s.value;
  return s;
}

DroSolution DroConditionalBound(const VectorXd& m1, const VectorXd& m0, const VectorXd& weights,
                                double rho, Side side) {
  if (!(rho >= 0.0)) throw Error(ErrorCode::kNegativeRho, "rho must be nonnegative");
  auto ratio = [&](const VectorXd& p) {
    const double d = p.dot(m0);
    if (!(d > 1e-12)) throw Error(ErrorCode::kZeroMass, "condition has no mass under p");
    return p.dot(m1) / d;
  };
  DroSolution cur{ratio(weights), weights};
  for (int it = 0; it < 100; ++it) {
    DroSolution step = DroMeanBound({m1 - cur.value * m0, weights, rho, side});
    const double next = ratio(step.p);
    const bool done = std::abs(step.value) <= 1e-13 || std::abs(next - cur.value) <= 1e-14;
    const bool improves = side == Side::kUpper ? next >= cur.value : next <= cur.value;
    if (improves) cur = {next, step.p};
    if (done || !improves) break;
  }
  return cur;
}

namespace {

class DivergenceObjective : public ThetaObjective {
 public:
  explicit DivergenceObjective(VectorXd w) : w_(std::move(w)) {}
  ValueAndGradient Evaluate(const VectorXd& theta) override {
    VectorXd dev = theta.array() - 1.0;
    return {-w_.dot(dev.cwiseAbs2()), -2.0 * w_.cwiseProduct(dev)};
  }

 private:
  VectorXd w_;
};

}  // namespace

RhoEstimate RhoObservable(const ProblemSpec& spec, const SolverSettings& settings,
                          std::span<const VectorXd> extra_starts) {
  PreparedProblem prep = Prepare(spec);
  if (!HasFeasibleRatio(prep)) {
    throw Error(ErrorCode::kNoFeasiblePointFound, "no ratio in the model meets the constraints and floor");
  }
  AlProblem problem;
  problem.model = &prep.model;
  problem.constraint_matrix = prep.constraint_matrix;
  problem.targets = prep.targets;
  for (const auto& c : spec.constraints) {
    if (c.kind == MomentConstraint::Kind::kCovarianceSign) {
      problem.covariance_terms.push_back(
          CovarianceTerm::Build(c.u, c.v, c.sign, prep.strata, spec.dataset));
    }
  }
  const VectorXd w = prep.weights;
  problem.objective = [w] { return std::make_unique<DivergenceObjective>(w); };
  // The concave objective is bounded on the penalized problem only when the
  // penalty curvature dominates it along every stratum direction.
  SolverSettings st = settings;
  st.penalty_mu = std::max(st.penalty_mu, 4.0 / w.minCoeff());
  st.mu_max = std::max(st.mu_max, 16.0 * st.penalty_mu);
  AlResult res = AugmentedLagrangian(problem, st, extra_starts);
  if (res.best < 0) {
    throw Error(ErrorCode::kNoFeasiblePointFound, "no feasible reweighting found for rho");
  }
  const AlRun& best = res.runs[static_cast<std::size_t>(res.best)];
  RhoEstimate out;
  out.theta = prep.model.Theta(best.alpha);
  out.rho = w.dot((out.theta.array() - 1.0).square().matrix());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : res.runs) {
    if (!r.feasible) continue;
    lo = std::min(lo, -r.value);
    hi = std::max(hi, -r.value);
  }
  out.spread = hi - lo;
  // A feasible start is itself a witness; the ascent may leave its basin.
  for (const auto& a : extra_starts) {
    if (a.size() != static_cast<Eigen::Index>(prep.model.dim())) continue;
    const VectorXd theta = prep.model.Theta(a);
    if (prep.ConstraintResidual(a).cwiseAbs().maxCoeff() > st.constraint_tol ||
        theta.minCoeff() < prep.model.floor() - st.constraint_tol) {
      continue;
    }
    bool signs_ok = true;
    for (const auto& t : problem.covariance_terms) {
      signs_ok = signs_ok && t.sign * t.Covariance(theta) >= -st.constraint_tol;
    }
    if (!signs_ok) continue;
    const double rho = w.dot((theta.array() - 1.0).square().matrix());
    if (rho > out.rho) {
      out.rho = rho;
      out.theta = theta;
    }
  }
  return out;
}

DroInterval DroBounds(const ProblemSpec& spec, double rho) {
  PreparedProblem prep = Prepare(spec);
  const VectorXd& w = prep.weights;
  const auto& est = spec.estimand;
  if (est.kind == Estimand::Kind::kMean) {
    VectorXd h = prep.strata.Means(EvalExpr(est.h, spec.dataset));
    return {DroMeanBound({h, w, rho, Side::kLower}).value,
            DroMeanBound({h, w, rho, Side::kUpper}).value};
  }
  if (est.kind == Estimand::Kind::kConditionalMean) {
    VectorXd cond = EvalExpr(est.condition, spec.dataset);
    VectorXd m0 = prep.strata.Means(cond);
    VectorXd m1 = prep.strata.Means(cond.cwiseProduct(EvalExpr(est.h, spec.dataset)));
    return {DroConditionalBound(m1, m0, w, rho, Side::kLower).value,
            DroConditionalBound(m1, m0, w, rho, Side::kUpper).value};
  }
  throw Error(ErrorCode::kUnsupportedEstimand, "DRO baseline covers (conditional) means only");
}

}  // namespace shiftbound
