#ifndef SHIFTBOUND_TESTS_INSTANCES_H_
#define SHIFTBOUND_TESTS_INSTANCES_H_

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shiftbound/dataset.h"
#include "shiftbound/expr.h"
#include "shiftbound/problem.h"
#include "shiftbound/simplex.h"

namespace shiftbound::testing {

// A problem given directly at stratum level: stratum s holds counts[s] rows
// with key S = s, outcome H = h[s], condition C (binary, c_rows[s] of the
// rows set) and constraint columns G<j> = g(j, s).
struct StratumInstance {
  std::vector<int> counts;
  Eigen::VectorXd h;
  std::vector<int> c_rows;  // empty: C == 1 everywhere
  Eigen::MatrixXd g;        // m x S
  Eigen::VectorXd targets;  // m
  double floor = 0.0;

  Eigen::VectorXd Weights() const {
    Eigen::VectorXd w(static_cast<Eigen::Index>(counts.size()));
    double n = 0;
    for (int c : counts) n += c;
    for (std::size_t s = 0; s < counts.size(); ++s) w[Eigen::Index(s)] = counts[s] / n;
    return w;
  }
  Eigen::VectorXd ConditionShare() const {
    Eigen::VectorXd m0 = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(counts.size()));
    if (c_rows.empty()) return m0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      m0[Eigen::Index(s)] = static_cast<double>(c_rows[s]) / counts[s];
    }
    return m0;
  }

  Dataset MakeData() const {
    const auto m = g.rows();
    std::vector<ColumnSpec> cols{ColumnSpec::Discrete("S", static_cast<int>(counts.size())),
                                 ColumnSpec::Continuous("H"), ColumnSpec::Discrete("C")};
    for (Eigen::Index j = 0; j < m; ++j) cols.push_back(ColumnSpec::Continuous("G" + std::to_string(j)));
    int n = 0;
    for (int c : counts) n += c;
    Eigen::MatrixXd v(n, static_cast<Eigen::Index>(cols.size()));
    Eigen::Index r = 0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      for (int i = 0; i < counts[s]; ++i, ++r) {
        v(r, 0) = static_cast<double>(s);
        v(r, 1) = h[Eigen::Index(s)];
        v(r, 2) = c_rows.empty() || i < c_rows[s] ? 1.0 : 0.0;
        for (Eigen::Index j = 0; j < m; ++j) v(r, 3 + j) = g(j, Eigen::Index(s));
      }
    }
    return Dataset(std::move(cols), std::move(v));
  }

  std::vector<MomentConstraint> Constraints(Eigen::Index upto = -1) const {
    std::vector<MomentConstraint> out;
    const Eigen::Index m = upto < 0 ? g.rows() : upto;
    for (Eigen::Index j = 0; j < m; ++j) {
      out.push_back(MomentConstraint::Equality(Expr::Col("G" + std::to_string(j)), targets[j]));
    }
    return out;
  }

  ProblemSpec Spec(bool conditional, Side side, Eigen::Index upto = -1) const {
    Estimand est = conditional ? Estimand::ConditionalMean(Expr::Col("H"), Expr::Col("C"))
                               : Estimand::Mean(Expr::Col("H"));
    return ProblemSpec(MakeData(), Constraints(upto), est, RatioModelSpec::Tabular({"S"}), side,
                       floor, {"S"});
  }

  // LP over theta written out by hand from the stratum quantities.
  LinearProgram ThetaLp(Side side, Eigen::Index upto = -1) const {
    const Eigen::VectorXd w = Weights();
    const Eigen::Index m = upto < 0 ? g.rows() : upto;
    const auto s = w.size();
    LinearProgram lp;
    lp.objective = w.cwiseProduct(h);
    lp.a_eq.resize(m + 1, s);
    lp.a_eq.row(0) = w.transpose();
    for (Eigen::Index j = 0; j < m; ++j) lp.a_eq.row(j + 1) = w.cwiseProduct(g.row(j).transpose()).transpose();
    lp.b_eq.resize(m + 1);
    lp.b_eq[0] = 1.0;
    lp.b_eq.tail(m) = targets.head(m);
    lp.lower = Eigen::VectorXd::Constant(s, floor);
    lp.sense = side == Side::kLower ? LPSense::kMinimize : LPSense::kMaximize;
    return lp;
  }
};

// Targets come from a random theta above the floor, so the system is
// feasible. Constraint values are rounded to a grid to keep them exact.
inline StratumInstance RandomInstance(std::mt19937_64& rng, int strata, int constraints,
                                      double floor) {
  std::uniform_int_distribution<int> count(3, 12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  StratumInstance in;
  for (int s = 0; s < strata; ++s) in.counts.push_back(count(rng));
  in.h = Eigen::VectorXd::NullaryExpr(strata, [&] { return std::round(u(rng) * 64) / 64; });
  in.g = Eigen::MatrixXd::NullaryExpr(constraints, strata, [&] { return std::round(u(rng) * 8) / 8; });
  in.floor = floor;
  const Eigen::VectorXd w = in.Weights();
  Eigen::VectorXd theta =
      Eigen::VectorXd::NullaryExpr(strata, [&] { return floor + 0.1 + 2.0 * u(rng); });
  // Rescale the excess over the floor so that sum w theta = 1.
  const double excess = w.dot((theta.array() - floor).matrix());
  theta = (floor + (theta.array() - floor) * (1.0 - floor) / excess).matrix();
  in.targets = in.g * w.cwiseProduct(theta);
  return in;
}

}  // namespace shiftbound::testing

#endif  // SHIFTBOUND_TESTS_INSTANCES_H_
