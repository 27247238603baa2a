#include "shiftbound/bilevel.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "shiftbound/convex_bounds.h"
#include "shiftbound/error.h"
#include "shiftbound/inference.h"

namespace shiftbound {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double SideSign(Side side) { return side == Side::kLower ? 1.0 : -1.0; }

}  // namespace

void SolverSettings::Validate() const {
  if (!(step_size > 0.0)) throw Error(ErrorCode::kOutOfRange, "step size must be positive");
  if (!(penalty_mu > 0.0)) throw Error(ErrorCode::kOutOfRange, "penalty must be positive");
  if (!(mu_growth >= 1.0)) throw Error(ErrorCode::kOutOfRange, "penalty growth must be >= 1");
  if (restarts < 1) throw Error(ErrorCode::kOutOfRange, "need at least one restart");
  if (max_outer_iters < 1 || max_inner_iters < 1) {
    throw Error(ErrorCode::kOutOfRange, "iteration limits must be positive");
  }
  if (!(constraint_tol > 0.0)) throw Error(ErrorCode::kOutOfRange, "constraint tolerance <= 0");
}

MatrixXd MixedSecond(const MatrixXd& theta_jacobian, const MatrixXd& stratum_grad_sums, double n) {
  if (theta_jacobian.cols() != stratum_grad_sums.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "Jacobian and gradient sums disagree in strata");
  }
  return theta_jacobian * stratum_grad_sums / n;
}

MatrixXd MixedSecond(const FittedM& fit, const MatrixXd& theta_jacobian,
                     const StratumTable& strata, const MatrixXd& per_sample_grad) {
  if (per_sample_grad.rows() != static_cast<Index>(strata.total()) ||
      per_sample_grad.cols() != fit.beta.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "per-sample gradient has the wrong shape");
  }
  MatrixXd sums = MatrixXd::Zero(static_cast<Index>(strata.size()), per_sample_grad.cols());
  for (std::size_t i = 0; i < strata.total(); ++i) {
    sums.row(static_cast<Index>(strata.StratumOfRow(i))) += per_sample_grad.row(static_cast<Index>(i));
  }
  return MixedSecond(theta_jacobian, sums, static_cast<double>(strata.total()));
}

VectorXd Hypergradient(const MatrixXd& mixed, const FittedM& fit, const VectorXd& h_grad) {
  if (mixed.cols() != fit.hessian.rows() || h_grad.size() != fit.hessian.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "hypergradient inputs disagree in shape");
  }
  Eigen::LLT<MatrixXd> llt(fit.hessian);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kHessianNotPD, "inner Hessian is not positive definite");
  }
  return kHypergradientSign * (mixed * llt.solve(h_grad));
}

ValueAndGradient AteValue(const VectorXd& theta, const Dataset& ds, const StratumTable& strata,
                          const Estimand& est) {
  if (theta.size() != static_cast<Index>(strata.size())) {
    throw Error(ErrorCode::kDimensionMismatch, "theta must have one entry per stratum");
  }
  auto pos = [&](const std::string& c) {
    auto p = strata.KeyPosition(c);
    if (!p) throw Error(ErrorCode::kUnknownColumn, c + " is not a stratum key column");
    return *p;
  };
  const std::size_t y_pos = pos(est.y_column);
  const std::size_t a_pos = pos(est.a_column);
  std::vector<std::size_t> x_pos;
  for (const auto& x : est.x_columns) x_pos.push_back(pos(x));
  (void)ds;

  struct Cell {
    double mass[2] = {0.0, 0.0};  // by a
    double ones[2] = {0.0, 0.0};  // y = 1, by a
    bool seen[2] = {false, false};
    double total = 0.0;
  };
  const VectorXd w = strata.Weights();
  std::map<std::vector<int>, Cell> cells;
  std::vector<std::vector<int>> x_of(strata.size());
  double total = 0.0;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    const auto& prof = strata.stratum(s).profile;
    std::vector<int> x;
    for (auto p : x_pos) x.push_back(prof[p]);
    x_of[s] = x;
    const int a = prof[a_pos];
    const double m = w[static_cast<Index>(s)] * theta[static_cast<Index>(s)];
    Cell& c = cells[x];
    c.mass[a] += m;
    c.seen[a] = true;
    if (prof[y_pos] == 1) c.ones[a] += m;
    c.total += m;
    total += m;
  }
  if (!(std::abs(total) >= 1e-12)) throw Error(ErrorCode::kZeroMass, "total reweighted mass");
  std::map<std::vector<int>, double> diff;
  double value = 0.0;
  for (const auto& [x, c] : cells) {
    for (int a = 0; a < 2; ++a) {
      if (!c.seen[a]) throw Error(ErrorCode::kEmptyCell, "no samples with " + est.a_column + "=" +
                                                            std::to_string(a) + " in an x cell");
      if (!(std::abs(c.mass[a]) >= 1e-12)) {
        throw Error(ErrorCode::kZeroMass, "reweighted (x, a) cell has no mass");
      }
    }
    const double d = c.ones[1] / c.mass[1] - c.ones[0] / c.mass[0];
    diff[x] = d;
    value += c.total * d;
  }
  value /= total;

  ValueAndGradient out;
  out.value = value;
  out.gradient.resize(theta.size());
  for (std::size_t s = 0; s < strata.size(); ++s) {
    const auto& prof = strata.stratum(s).profile;
    const Cell& c = cells[x_of[s]];
    const int a = prof[a_pos];
    const double y = prof[y_pos] == 1 ? 1.0 : 0.0;
    const double r = c.ones[a] / c.mass[a];
    const double dr = (y - r) / c.mass[a];  // per unit mass
    const double dd = a == 1 ? dr : -dr;
    const double g = (diff[x_of[s]] + c.total * dd - value) / total;
    out.gradient[static_cast<Index>(s)] = w[static_cast<Index>(s)] * g;
  }
  return out;
}

CovarianceTerm CovarianceTerm::Build(const std::string& u, const std::string& v, int sign,
                                     const StratumTable& strata, const Dataset& ds) {
  CovarianceTerm t;
  VectorXd uu = ds.Column(u);
  VectorXd vv = ds.Column(v);
  t.weights = strata.Weights();
  t.u_mean = strata.Means(uu);
  t.v_mean = strata.Means(vv);
  t.uv_mean = strata.Means(uu.cwiseProduct(vv));
  t.sign = sign >= 0 ? +1 : -1;
  return t;
}

double CovarianceTerm::Covariance(const VectorXd& theta) const {
  VectorXd wt = weights.cwiseProduct(theta);
  return wt.dot(uv_mean) - wt.dot(u_mean) * wt.dot(v_mean);
}

ValueAndGradient CovarianceSignPenalty(const CovarianceTerm& term, const VectorXd& theta) {
  if (theta.size() != term.weights.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "theta must have one entry per stratum");
  }
  ValueAndGradient out;
  const double viol = std::max(0.0, -term.sign * term.Covariance(theta));
  out.value = viol * viol;
  out.gradient = VectorXd::Zero(theta.size());
  if (viol > 0.0) {
    VectorXd wt = term.weights.cwiseProduct(theta);
    VectorXd dcov = term.weights.cwiseProduct(term.uv_mean - wt.dot(term.v_mean) * term.u_mean -
                                              wt.dot(term.u_mean) * term.v_mean);
    out.gradient = 2.0 * viol * (-term.sign) * dcov;
  }
  return out;
}

ValueAndGradient CovarianceSignPenalty(const VectorXd& theta, const std::string& u,
                                       const std::string& v, int sign, const StratumTable& strata,
                                       const Dataset& ds) {
  return CovarianceSignPenalty(CovarianceTerm::Build(u, v, sign, strata, ds), theta);
}

namespace {

// Inequality g(theta) <= 0 handled by a shifted quadratic penalty.
struct Inequalities {
  VectorXd value;     // g
  MatrixXd gradient;  // d g_k / d theta, one column per inequality
};

class Augmented {
 public:
  Augmented(const AlProblem& p, std::unique_ptr<ThetaObjective> obj)
      : p_(p), obj_(std::move(obj)), jac_(p.model->jacobian()) {
    basis_floor_ = !p.model->IsBox();
    n_ineq_ = static_cast<Index>(p.covariance_terms.size()) +
              (basis_floor_ ? static_cast<Index>(p.model->strata_count()) : 0);
    lambda = VectorXd::Zero(p.targets.size());
    nu = VectorXd::Zero(n_ineq_);
    if (p.model->IsBox()) lower_ = p.model->ParamLowerBounds();
  }

  VectorXd Project(const VectorXd& a) const { return lower_.size() ? a.cwiseMax(lower_) : a; }

  Inequalities Ineq(const VectorXd& theta) const {
    Inequalities q;
    q.value.resize(n_ineq_);
    q.gradient = MatrixXd::Zero(theta.size(), n_ineq_);
    Index k = 0;
    for (const auto& t : p_.covariance_terms) {
      VectorXd wt = t.weights.cwiseProduct(theta);
      q.value[k] = -t.sign * t.Covariance(theta);
      q.gradient.col(k) = -t.sign * t.weights.cwiseProduct(t.uv_mean - wt.dot(t.v_mean) * t.u_mean -
                                                           wt.dot(t.u_mean) * t.v_mean);
      ++k;
    }
    if (basis_floor_) {
      for (Index s = 0; s < theta.size(); ++s, ++k) {
        q.value[k] = p_.model->floor() - theta[s];
        q.gradient(s, k) = -1.0;
      }
    }
    return q;
  }

  // Raw objective; +inf where it is undefined.
  double Objective(const VectorXd& alpha, VectorXd* grad) {
    try {
      ValueAndGradient vg = obj_->Evaluate(jac_.transpose() * alpha);
      if (!std::isfinite(vg.value)) return kInf;
      if (grad) *grad = jac_ * vg.gradient;
      return vg.value;
    } catch (const Error&) {
      return kInf;
    }
  }

  double Lagrangian(const VectorXd& alpha, VectorXd& grad) {
    double f = Objective(alpha, &grad);
    if (!std::isfinite(f)) return kInf;
    VectorXd r = p_.constraint_matrix * alpha - p_.targets;
    f += lambda.dot(r) + 0.5 * mu * r.squaredNorm();
    grad += p_.constraint_matrix.transpose() * (lambda + mu * r);
    if (n_ineq_ > 0) {
      Inequalities q = Ineq(jac_.transpose() * alpha);
      VectorXd shifted = (nu + mu * q.value).cwiseMax(0.0);
      f += (shifted.squaredNorm() - nu.squaredNorm()) / (2.0 * mu);
      grad += jac_ * (q.gradient * shifted);
    }
    return f;
  }

  // Max violation of equalities and inequalities.
  double Violation(const VectorXd& alpha, VectorXd* r_out = nullptr, VectorXd* g_out = nullptr) const {
    VectorXd r = p_.constraint_matrix * alpha - p_.targets;
    double v = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
    if (n_ineq_ > 0) {
      Inequalities q = Ineq(jac_.transpose() * alpha);
      v = std::max(v, q.value.maxCoeff());
      if (g_out) *g_out = q.value;
    }
    if (r_out) *r_out = r;
    return std::max(v, 0.0);
  }

  VectorXd lambda;
  VectorXd nu;
  double mu = 10.0;

 private:
  const AlProblem& p_;
  std::unique_ptr<ThetaObjective> obj_;
  const MatrixXd& jac_;
  VectorXd lower_;
  bool basis_floor_ = false;
  Index n_ineq_ = 0;
};

struct InnerResult {
  bool ok = true;
  double stationarity = 0.0;
};

// Spectral projected gradient with a nonmonotone Armijo search.
InnerResult MinimizeInner(Augmented& aug, VectorXd& x, double tol, int max_iters,
                          double first_step) {
  x = aug.Project(x);
  VectorXd g;
  double f = aug.Lagrangian(x, g);
  InnerResult res;
  if (!std::isfinite(f)) {
    res.ok = false;
    return res;
  }
  std::deque<double> history{f};
  double step = first_step;
  VectorXd gn;
  for (int it = 0; it < max_iters; ++it) {
    VectorXd pg = aug.Project(x - g) - x;
    res.stationarity = pg.lpNorm<Eigen::Infinity>();
    if (res.stationarity <= tol) return res;
    VectorXd d = aug.Project(x - step * g) - x;
    double gd = g.dot(d);
    if (!(gd < 0.0)) {
      d = pg;
      gd = g.dot(d);
    }
    const double ref = *std::max_element(history.begin(), history.end());
    double t = 1.0;
    bool accepted = false;
    VectorXd xn;
    double fn = kInf;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + t * d;
      fn = aug.Lagrangian(xn, gn);
      if (std::isfinite(fn) && fn <= ref + 1e-4 * t * gd) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) return res;  // stalled at working precision
    VectorXd s = xn - x;
    VectorXd y = gn - g;
    const double sy = s.dot(y);
    step = sy > 1e-300 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e12) : std::min(step * 2.0, 1e12);
    x = std::move(xn);
    g = gn;
    f = fn;
    history.push_back(f);
    if (history.size() > 10) history.pop_front();
  }
  VectorXd pg = aug.Project(x - g) - x;
  res.stationarity = pg.lpNorm<Eigen::Infinity>();
  return res;
}

AlRun RunOne(const AlProblem& problem, const SolverSettings& st, VectorXd x) {
  Augmented aug(problem, problem.objective());
  aug.mu = st.penalty_mu;
  AlRun run;
  double prev = kInf;
  bool tight = false;
  for (int k = 0; k < st.max_outer_iters; ++k) {
    const double tol = std::max(st.grad_tol, 1e-3 * std::pow(0.3, k));
    InnerResult inner = MinimizeInner(aug, x, tol, st.max_inner_iters, st.step_size);
    run.outer_iterations = k + 1;
    if (!inner.ok) {
      run.failure = "objective undefined at the start of an inner solve";
      break;
    }
    VectorXd r, gq;
    const double viol = aug.Violation(x, &r, &gq);
    aug.lambda += aug.mu * r;
    if (gq.size()) aug.nu = (aug.nu + aug.mu * gq).cwiseMax(0.0);
    tight = tol <= st.grad_tol * (1.0 + 1e-12);
    if (tight && viol <= 1e-2 * st.constraint_tol) break;
    if (viol > 0.25 * prev) aug.mu = std::min(aug.mu * st.mu_growth, st.mu_max);
    prev = viol;
  }
  run.alpha = x;
  run.multipliers = aug.lambda;
  run.violation = aug.Violation(x);
  run.value = aug.Objective(x, nullptr);
  run.feasible = run.failure.empty() && std::isfinite(run.value) &&
                 run.violation <= st.constraint_tol;
  if (run.failure.empty() && !run.feasible) {
    run.failure = std::isfinite(run.value) ? "constraint violation above tolerance"
                                           : "objective undefined at the final point";
  }
  return run;
}

}  // namespace

AlResult AugmentedLagrangian(const AlProblem& problem, const SolverSettings& settings,
                             std::span<const VectorXd> extra_starts) {
  settings.Validate();
  if (!problem.model || !problem.objective) {
    throw Error(ErrorCode::kOutOfRange, "augmented Lagrangian needs a model and an objective");
  }
  const VectorXd base = InitUniform(*problem.model);
  std::vector<VectorXd> starts;
  for (int r = 0; r < settings.restarts; ++r) {
    std::mt19937_64 rng(settings.seed + static_cast<std::uint64_t>(r));
    std::uniform_real_distribution<double> u(-settings.init_perturbation, settings.init_perturbation);
    VectorXd x = base;
    for (Index k = 0; k < x.size(); ++k) x[k] += u(rng);
    starts.push_back(std::move(x));
  }
  for (const auto& s : extra_starts) {
    if (s.size() == base.size()) starts.push_back(s);
  }

  AlResult out;
  out.runs.resize(starts.size());
  if (settings.parallel_restarts && starts.size() > 1) {
    std::vector<std::future<AlRun>> jobs;
    for (const auto& s : starts) {
      jobs.push_back(std::async(std::launch::async, RunOne, std::cref(problem), std::cref(settings), s));
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) out.runs[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < starts.size(); ++i) out.runs[i] = RunOne(problem, settings, starts[i]);
  }
  for (std::size_t i = 0; i < out.runs.size(); ++i) {
    const auto& r = out.runs[i];
    if (r.feasible && (out.best < 0 || r.value < out.runs[static_cast<std::size_t>(out.best)].value)) {
      out.best = static_cast<int>(i);
    }
  }
  return out;
}

namespace {

class LinearObjective : public ThetaObjective {
 public:
  explicit LinearObjective(VectorXd c) : c_(std::move(c)) {}
  ValueAndGradient Evaluate(const VectorXd& theta) override { return {c_.dot(theta), c_}; }

 private:
  VectorXd c_;
};

class RatioObjective : public ThetaObjective {
 public:
  RatioObjective(VectorXd num, VectorXd den, double sign)
      : num_(std::move(num)), den_(std::move(den)), sign_(sign) {}
  ValueAndGradient Evaluate(const VectorXd& theta) override {
    const double n = num_.dot(theta);
    const double d = den_.dot(theta);
    if (!(d > 1e-12)) throw Error(ErrorCode::kZeroMass, "reweighted condition mass vanished");
    return {sign_ * n / d, sign_ * (num_ * d - den_ * n) / (d * d)};
  }

 private:
  VectorXd num_, den_;
  double sign_;
};

// Rows grouped by (stratum, design row) carry the count and mean outcome;
// both losses are affine in y, so the fit and its derivatives are unchanged.
struct CompressedDesign {
  MatrixXd x;
  VectorXd y;
  VectorXd count;
  std::vector<Index> stratum;
};

CompressedDesign Compress(const Dataset& ds, const StratumTable& strata, const Estimand& est) {
  MatrixXd x = est.DesignMatrix(ds);
  VectorXd y = ds.Column(est.outcome);
  std::map<std::pair<std::size_t, std::vector<double>>, std::size_t> index;
  std::vector<std::vector<double>> rows;
  std::vector<double> ysum, cnt;
  std::vector<Index> st;
  for (Index i = 0; i < x.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
    const std::size_t s = strata.StratumOfRow(static_cast<std::size_t>(i));
    auto [it, fresh] = index.try_emplace({s, row}, rows.size());
    if (fresh) {
      rows.push_back(row);
      ysum.push_back(0.0);
      cnt.push_back(0.0);
      st.push_back(static_cast<Index>(s));
    }
    ysum[it->second] += y[i];
    cnt[it->second] += 1.0;
  }
  CompressedDesign c;
  const auto g = static_cast<Index>(rows.size());
  c.x.resize(g, x.cols());
  c.y.resize(g);
  c.count.resize(g);
  for (Index k = 0; k < g; ++k) {
    for (Index j = 0; j < x.cols(); ++j) c.x(k, j) = rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    c.count[k] = cnt[static_cast<std::size_t>(k)];
    c.y[k] = ysum[static_cast<std::size_t>(k)] / c.count[k];
  }
  c.stratum = std::move(st);
  return c;
}

class MCoefficientObjective : public ThetaObjective {
 public:
  MCoefficientObjective(std::shared_ptr<const CompressedDesign> design, MFamily family,
                        std::size_t coord, double n, Index strata, double sign, double inner_tol)
      : d_(std::move(design)), family_(family), coord_(static_cast<Index>(coord)), n_(n),
        strata_(strata), sign_(sign) {
    options_.tol = inner_tol;
  }

  ValueAndGradient Evaluate(const VectorXd& theta) override {
    VectorXd w(d_->x.rows());
    for (Index g = 0; g < w.size(); ++g) w[g] = theta[d_->stratum[static_cast<std::size_t>(g)]] * d_->count[g];
    FittedM fit = family_ == MFamily::kLinear
                      ? WeightedOls(d_->x, d_->y, w, n_)
                      : WeightedLogistic(d_->x, d_->y, w, n_, options_, warm_.size() ? &warm_ : nullptr);
    warm_ = fit.beta;
    MatrixXd grads = PerSampleGradient(family_, d_->x, d_->y, fit.beta);
    MatrixXd sums = MatrixXd::Zero(strata_, grads.cols());
    for (Index g = 0; g < grads.rows(); ++g) {
      sums.row(d_->stratum[static_cast<std::size_t>(g)]) += d_->count[g] * grads.row(g);
    }
    VectorXd e = VectorXd::Unit(fit.beta.size(), coord_);
    // Per-stratum hypergradient: the ratio Jacobian is applied by the caller.
    VectorXd grad = Hypergradient(sums / n_, fit, e);
    return {sign_ * fit.beta[coord_], sign_ * grad};
  }

 private:
  std::shared_ptr<const CompressedDesign> d_;
  MFamily family_;
  Index coord_;
  double n_;
  Index strata_;
  double sign_;
  LogisticOptions options_;
  VectorXd warm_;
};

class AteObjective : public ThetaObjective {
 public:
  AteObjective(const ProblemSpec& spec, const StratumTable& strata, double sign)
      : spec_(spec), strata_(strata), sign_(sign) {}
  ValueAndGradient Evaluate(const VectorXd& theta) override {
    ValueAndGradient vg = AteValue(theta, spec_.dataset, strata_, spec_.estimand);
    vg.value *= sign_;
    vg.gradient *= sign_;
    return vg;
  }

 private:
  const ProblemSpec& spec_;
  const StratumTable& strata_;
  double sign_;
};

}  // namespace

ObjectiveFactory MakeEstimandObjective(const ProblemSpec& spec, const PreparedProblem& prep,
                                       const SolverSettings& settings) {
  const double sign = SideSign(spec.side);
  const auto& est = spec.estimand;
  const VectorXd& w = prep.weights;
  switch (est.kind) {
    case Estimand::Kind::kMean: {
      VectorXd c = sign * w.cwiseProduct(prep.strata.Means(EvalExpr(est.h, spec.dataset)));
      return [c] { return std::make_unique<LinearObjective>(c); };
    }
    case Estimand::Kind::kConditionalMean: {
      VectorXd cond = EvalExpr(est.condition, spec.dataset);
      VectorXd num = w.cwiseProduct(prep.strata.Means(cond.cwiseProduct(EvalExpr(est.h, spec.dataset))));
      VectorXd den = w.cwiseProduct(prep.strata.Means(cond));
      return [num, den, sign] { return std::make_unique<RatioObjective>(num, den, sign); };
    }
    case Estimand::Kind::kMCoefficient: {
      auto design = std::make_shared<const CompressedDesign>(Compress(spec.dataset, prep.strata, est));
      const double n = static_cast<double>(prep.n());
      const auto s = static_cast<Index>(prep.strata.size());
      const MFamily family = est.family;
      const std::size_t coord = est.coord_index;
      const double tol = settings.inner_tol;
      return [=] {
        return std::make_unique<MCoefficientObjective>(design, family, coord, n, s, sign, tol);
      };
    }
    case Estimand::Kind::kDiscreteATE: {
      return [&spec, &prep, sign] { return std::make_unique<AteObjective>(spec, prep.strata, sign); };
    }
  }
  throw Error(ErrorCode::kUnsupportedEstimand, est.Describe());
}

namespace {

// Variance of an M-coefficient bound at theta*.
double MBoundVariance(const ProblemSpec& spec, const PreparedProblem& prep, const VectorXd& theta_strata,
                      const VectorXd& duals, bool split, std::uint64_t seed, SolveDiagnostics& diag) {
  const auto& est = spec.estimand;
  const std::size_t n = prep.n();
  std::vector<std::size_t> fit_rows(n), con_rows;
  std::iota(fit_rows.begin(), fit_rows.end(), std::size_t{0});
  if (split && n >= 4) {
    std::mt19937_64 rng(seed);
    std::shuffle(fit_rows.begin(), fit_rows.end(), rng);
    con_rows.assign(fit_rows.begin() + static_cast<std::ptrdiff_t>(n / 2), fit_rows.end());
    fit_rows.resize(n / 2);
    std::sort(fit_rows.begin(), fit_rows.end());
    std::sort(con_rows.begin(), con_rows.end());
  } else {
    con_rows = fit_rows;
    split = false;
  }
  VectorXd theta = prep.strata.Expand(theta_strata);
  MatrixXd x_all = est.DesignMatrix(spec.dataset);
  VectorXd y_all = spec.dataset.Column(est.outcome);
  auto take = [](const auto& rows, const std::vector<std::size_t>& idx) {
    using T = std::decay_t<decltype(rows)>;
    T out(static_cast<Index>(idx.size()), rows.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = rows.row(static_cast<Index>(idx[i]));
    return out;
  };
  MatrixXd x = take(x_all, fit_rows);
  MatrixXd y = take(MatrixXd(y_all), fit_rows);
  MatrixXd wt = take(MatrixXd(theta), fit_rows);
  FittedM fit = FitM(est.family, x, y.col(0), wt.col(0));
  MatrixXd grads = PerSampleGradient(est.family, x, y.col(0), fit.beta);
  MatrixXd sandwich = SandwichCov(fit, wt.col(0), grads);
  VectorXd e = VectorXd::Unit(fit.beta.size(), static_cast<Index>(est.coord_index));

  MatrixXd g(static_cast<Index>(con_rows.size()), static_cast<Index>(spec.constraints.size()));
  g.setZero();
  for (std::size_t j = 0; j < spec.constraints.size(); ++j) {
    const auto& c = spec.constraints[j];
    if (c.kind != MomentConstraint::Kind::kMomentEquality) continue;
    VectorXd col = EvalExpr(c.expr, spec.dataset);
    for (std::size_t i = 0; i < con_rows.size(); ++i) g(static_cast<Index>(i), static_cast<Index>(j)) = col[static_cast<Index>(con_rows[i])];
  }
  VectorXd th(static_cast<Index>(con_rows.size()));
  for (std::size_t i = 0; i < con_rows.size(); ++i) th[static_cast<Index>(i)] = theta[static_cast<Index>(con_rows[i])];
  bool ignored = false;
  const double v = VarianceMBound(sandwich, e, th, g, duals, split, &ignored);
  if (ignored) {
    diag.warnings.push_back(
        "variance ignores the covariance between the M-estimator and the constraint terms; "
        "enable sample splitting for the split-sample form");
  }
  return v;
}

}  // namespace

BoundEstimate SolveNonconvexBound(const ProblemSpec& spec, const SolverSettings& settings,
                                  double ci_level, bool sample_split_variance,
                                  const VectorXd* warm_start) {
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
  problem.objective = MakeEstimandObjective(spec, prep, settings);
  std::vector<VectorXd> extra;
  if (warm_start) extra.push_back(*warm_start);
  AlResult res = AugmentedLagrangian(problem, settings, extra);

  const double sign = SideSign(spec.side);
  BoundEstimate be;
  be.side = spec.side;
  be.n = prep.n();
  be.ci_level = ci_level;
  auto& diag = be.diagnostics;
  diag.solver = "augmented-lagrangian";
  if (spec.estimand.kind == Estimand::Kind::kMCoefficient) diag.hypergradient_sign = kHypergradientSign;
  double lo = kInf, hi = -kInf;
  for (const auto& r : res.runs) {
    if (!r.feasible) continue;
    diag.restart_values.push_back(sign * r.value);
    lo = std::min(lo, sign * r.value);
    hi = std::max(hi, sign * r.value);
  }
  if (res.best < 0) {
    std::string why = res.runs.empty() ? "no starts" : res.runs.front().failure;
    throw Error(ErrorCode::kNoFeasiblePointFound, "every restart ended infeasible (" + why + ")");
  }
  const AlRun& best = res.runs[static_cast<std::size_t>(res.best)];
  diag.restart_spread = hi - lo;
  diag.outer_iterations = best.outer_iterations;
  diag.constraint_violation = best.violation;
  be.value = sign * best.value;
  be.alpha_star = best.alpha;
  be.theta_star = prep.model.Theta(best.alpha);
  // d value / d c_j = -lambda_j for the minimized objective.
  be.duals = VectorXd::Zero(static_cast<Index>(spec.constraints.size()));
  for (std::size_t j = 0; j < prep.equality_rows.size(); ++j) {
    be.duals[static_cast<Index>(prep.equality_rows[j])] = -sign * best.multipliers[static_cast<Index>(j)];
  }

  switch (spec.estimand.kind) {
    case Estimand::Kind::kMean:
    case Estimand::Kind::kConditionalMean:
      be.sigma2 = VarianceConvex(spec, prep, be.theta_star, be.duals, be.value);
      break;
    case Estimand::Kind::kMCoefficient:
      try {
        be.sigma2 = MBoundVariance(spec, prep, be.theta_star, be.duals, sample_split_variance,
                                   settings.seed, diag);
      } catch (const Error& e) {
        be.sigma2 = 0.0;
        diag.variance_available = false;
        diag.warnings.push_back(std::string("variance unavailable: ") + e.what());
      }
      break;
    case Estimand::Kind::kDiscreteATE:
      be.sigma2 = 0.0;
      diag.variance_available = false;
      diag.warnings.push_back("no asymptotic variance for the discrete ATE; use the bootstrap");
      break;
  }
  Interval ci = NormalCi(be.value, be.sigma2, be.n, ci_level,
                         spec.side == Side::kLower ? CiMode::kLowerOneSided : CiMode::kUpperOneSided);
  be.ci_lo = ci.lo;
  be.ci_hi = ci.hi;
  return be;
}

}  // namespace shiftbound
