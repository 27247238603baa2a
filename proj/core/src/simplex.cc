#include "shiftbound/simplex.h"

#include <cmath>
#include <limits>
#include <vector>

#include "shiftbound/error.h"

namespace shiftbound {
namespace {

enum class PhaseResult { kOptimal, kUnbounded };

// Revised simplex over  min c.x  s.t.  A x = b, x >= 0  with an initial
// feasible basis. Columns with allowed[j] == false never enter.
class RevisedSimplex {
 public:
  RevisedSimplex(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, std::vector<int> basis,
                 const SimplexOptions& options, int* pivot_budget, int* pivot_count)
      : a_(a),
        b_(b),
        basis_(std::move(basis)),
        options_(options),
        pivot_budget_(pivot_budget),
        pivot_count_(pivot_count) {
    Refactor();
  }

  PhaseResult Run(const Eigen::VectorXd& cost, const std::vector<bool>& allowed) {
    const int m = static_cast<int>(a_.rows());
    const int n = static_cast<int>(a_.cols());
    const int bland_after = options_.bland_after > 0 ? options_.bland_after : 10 * (m + n);
    int phase_pivots = 0;
    std::vector<bool> in_basis(static_cast<std::size_t>(n), false);
    while (true) {
      std::fill(in_basis.begin(), in_basis.end(), false);
      Eigen::VectorXd cb(m);
      for (int r = 0; r < m; ++r) {
        in_basis[static_cast<std::size_t>(basis_[r])] = true;
        cb[r] = cost[basis_[r]];
      }
      Eigen::VectorXd y = binv_.transpose() * cb;

      // Pricing.
      const bool bland = phase_pivots >= bland_after;
      int entering = -1;
      double best = -options_.optimality_tol;
      for (int j = 0; j < n; ++j) {
        if (in_basis[static_cast<std::size_t>(j)] || !allowed[static_cast<std::size_t>(j)]) continue;
        const double d = cost[j] - y.dot(a_.col(j));
        if (d < best) {
          entering = j;
          if (bland) break;
          best = d;
        }
      }
      if (entering < 0) return PhaseResult::kOptimal;

      // Ratio test; ties broken by the smallest basic index (Bland).
      Eigen::VectorXd u = binv_ * a_.col(entering);
      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m; ++r) {
        if (u[r] <= options_.pivot_tol) continue;
        const double ratio = std::max(xb_[r], 0.0) / u[r];
        const double tie = 1e-12 * std::max(1.0, ratio);
        if (leave < 0 || ratio < best_ratio - tie ||
            (ratio <= best_ratio + tie && basis_[r] < basis_[leave])) {
          best_ratio = std::min(ratio, best_ratio);
          leave = r;
        }
      }
      if (leave < 0) return PhaseResult::kUnbounded;

      if (--(*pivot_budget_) < 0) {
        throw Error(ErrorCode::kCycleLimitExceeded, "simplex pivot cap reached");
      }
      ++(*pivot_count_);
      ++phase_pivots;
      basis_[leave] = entering;
      Refactor();
    }
  }

  // Pivots basic columns outside `allowed` out of the basis at zero level
  // where possible. Rows whose basic artificial cannot leave are redundant;
  // their artificial stays basic at zero and never moves afterwards.
  void DriveOut(const std::vector<bool>& allowed) {
    const int m = static_cast<int>(a_.rows());
    const int n = static_cast<int>(a_.cols());
    for (int r = 0; r < m; ++r) {
      if (allowed[static_cast<std::size_t>(basis_[r])]) continue;
      Eigen::RowVectorXd row = binv_.row(r) * a_;
      int best = -1;
      double best_abs = options_.pivot_tol;
      for (int j = 0; j < n; ++j) {
        if (!allowed[static_cast<std::size_t>(j)] || IsBasic(j)) continue;
        if (std::abs(row[j]) > best_abs) {
          best_abs = std::abs(row[j]);
          best = j;
        }
      }
      if (best >= 0) {
        basis_[r] = best;
        Refactor();
      }
    }
  }

  const std::vector<int>& basis() const { return basis_; }
  const Eigen::VectorXd& xb() const { return xb_; }
  const Eigen::MatrixXd& binv() const { return binv_; }

 private:
  bool IsBasic(int j) const {
    for (int b : basis_) {
      if (b == j) return true;
    }
    return false;
  }

  void Refactor() {
    const int m = static_cast<int>(a_.rows());
    Eigen::MatrixXd bm(m, m);
    for (int r = 0; r < m; ++r) bm.col(r) = a_.col(basis_[r]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(bm);
    if (!lu.isInvertible()) {
      throw Error(ErrorCode::kCycleLimitExceeded, "basis matrix became singular");
    }
    binv_ = lu.inverse();
    xb_ = binv_ * b_;
  }

  const Eigen::MatrixXd& a_;
  const Eigen::VectorXd& b_;
  std::vector<int> basis_;
  SimplexOptions options_;
  int* pivot_budget_;
  int* pivot_count_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
};

}  // namespace

std::string_view LPStatusName(LPStatus status) {
  switch (status) {
    case LPStatus::kOptimal: return "optimal";
    case LPStatus::kInfeasible: return "infeasible";
    case LPStatus::kUnbounded: return "unbounded";
  }
  return "unknown";
}

void LinearProgram::Validate() const {
  const auto n = objective.size();
  if (a_eq.cols() != n || lower.size() != n || a_eq.rows() != b_eq.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "linear program dimensions are inconsistent");
  }
  if (!lower.allFinite() || !objective.allFinite() || !a_eq.allFinite() || !b_eq.allFinite()) {
    throw Error(ErrorCode::kOutOfRange, "linear program data must be finite");
  }
}

LPSolution SimplexSolve(const LinearProgram& lp, const SimplexOptions& options) {
  lp.Validate();
  const int m = static_cast<int>(lp.a_eq.rows());
  const int n = static_cast<int>(lp.objective.size());
  const Eigen::VectorXd cost_min =
      lp.sense == LPSense::kMinimize ? lp.objective : Eigen::VectorXd(-lp.objective);

  // Shift x = lower + x', flip rows so that b' >= 0, append artificials.
  Eigen::VectorXd b = lp.b_eq - lp.a_eq * lp.lower;
  Eigen::VectorXd row_sign = Eigen::VectorXd::Ones(m);
  Eigen::MatrixXd a(m, n + m);
  a.leftCols(n) = lp.a_eq;
  a.rightCols(m).setIdentity();
  for (int r = 0; r < m; ++r) {
    if (b[r] < 0) {
      row_sign[r] = -1.0;
      b[r] = -b[r];
      a.row(r).head(n) *= -1.0;
    }
  }

  int pivot_budget = options.max_pivots > 0 ? options.max_pivots : 200 * (m + n) + 1000;
  LPSolution sol;
  std::vector<int> basis(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) basis[static_cast<std::size_t>(r)] = n + r;

  RevisedSimplex simplex(a, b, basis, options, &pivot_budget, &sol.pivot_count);
  std::vector<bool> all(static_cast<std::size_t>(n + m), true);
  std::vector<bool> real(static_cast<std::size_t>(n + m), true);
  for (int r = 0; r < m; ++r) real[static_cast<std::size_t>(n + r)] = false;

  // Phase I.
  if (m > 0) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
    phase1.tail(m).setOnes();
    simplex.Run(phase1, all);
    double infeas = 0.0;
    for (int r = 0; r < m; ++r) {
      if (simplex.basis()[static_cast<std::size_t>(r)] >= n) infeas += std::max(simplex.xb()[r], 0.0);
    }
    const double scale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
    if (infeas > options.feasibility_tol * scale * std::max(1, m)) {
      sol.status = LPStatus::kInfeasible;
      return sol;
    }
    simplex.DriveOut(real);
  }

  // Phase II.
  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
  phase2.head(n) = cost_min;
  if (simplex.Run(phase2, real) == PhaseResult::kUnbounded) {
    sol.status = LPStatus::kUnbounded;
    return sol;
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd cb(m);
  for (int r = 0; r < m; ++r) {
    const int j = simplex.basis()[static_cast<std::size_t>(r)];
    if (j < n) x[j] = std::max(simplex.xb()[r], 0.0);
    cb[r] = phase2[j];
  }
  Eigen::VectorXd y = simplex.binv().transpose() * cb;
  Eigen::VectorXd duals = y.cwiseProduct(row_sign);
  if (lp.sense == LPSense::kMaximize) duals = -duals;

  sol.status = LPStatus::kOptimal;
  sol.primal = lp.lower + x;
  sol.value = lp.objective.dot(sol.primal);
  sol.duals = duals;
  sol.reduced_costs = lp.objective - lp.a_eq.transpose() * duals;
  return sol;
}

}  // namespace shiftbound
