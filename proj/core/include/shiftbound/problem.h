#ifndef SHIFTBOUND_PROBLEM_H_
#define SHIFTBOUND_PROBLEM_H_

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shiftbound/dataset.h"
#include "shiftbound/expr.h"
#include "shiftbound/ratio_model.h"
#include "shiftbound/strata.h"

namespace shiftbound {

enum class Side { kLower, kUpper };

inline std::string_view SideName(Side side) { return side == Side::kLower ? "lower" : "upper"; }

// A known target-population moment E_P[g(X)] = target, or a restriction on
// the sign of the reweighted covariance of two columns.
struct MomentConstraint {
  enum class Kind { kMomentEquality, kCovarianceSign };

  Kind kind = Kind::kMomentEquality;
  std::string name;
  Expr expr;
  double target = 0.0;
  // CovarianceSign only.
  std::string u;
  std::string v;
  int sign = +1;

  static MomentConstraint Equality(Expr expr, double target, std::string name = "");
  static MomentConstraint CovarianceSign(std::string u, std::string v, int sign);

  bool IsNormalization() const {
    return kind == Kind::kMomentEquality && expr.IsConstant() && target == 1.0;
  }
};

// g == 1 with target 1: the reweighted sample must remain a distribution.
MomentConstraint NormalizationConstraint();

// Lower bound on the density ratio implied by selection on observables:
// theta(X) = Pr(R=1) / Pr(R=1|X) >= Pr(R=1). Throws OutOfRange.
double SelectionFloor(double p_r1);

// Prepends the normalization constraint unless one is already present.
std::vector<MomentConstraint> WithNormalization(std::vector<MomentConstraint> constraints);

enum class MFamily { kLinear, kLogistic };

struct Estimand {
  enum class Kind { kMean, kConditionalMean, kMCoefficient, kDiscreteATE };

  Kind kind = Kind::kMean;
  // Mean / ConditionalMean
  Expr h;
  Expr condition;
  // MCoefficient
  MFamily family = MFamily::kLinear;
  std::string outcome;
  std::vector<Expr> design;
  bool intercept = true;
  std::size_t coord_index = 0;
  // DiscreteATE
  std::string y_column;
  std::string a_column;
  std::vector<std::string> x_columns;

  static Estimand Mean(Expr h);
  static Estimand ConditionalMean(Expr h, Expr condition);
  static Estimand MCoefficient(MFamily family, std::string outcome, std::vector<Expr> design,
                               bool intercept, std::size_t coord_index);
  static Estimand DiscreteATE(std::string y, std::string a, std::vector<std::string> xs);

  // Dimension of the M-estimation design (including the intercept).
  std::size_t DesignDim() const { return design.size() + (intercept ? 1 : 0); }
  // Design matrix rows for M-estimation (intercept first when present).
  Eigen::MatrixXd DesignMatrix(const Dataset& ds) const;
  std::vector<std::string> Columns() const;
  std::string Describe() const;
};

struct ProblemSpec {
  Dataset dataset;
  std::vector<MomentConstraint> constraints;  // normalization included
  Estimand estimand;
  RatioModelSpec ratio_model;
  Side side = Side::kLower;
  double floor = 0.0;
  // Columns defining strata; empty means every discrete column.
  std::vector<std::string> strata_key;

  ProblemSpec(Dataset ds, std::vector<MomentConstraint> cons, Estimand est, RatioModelSpec model,
              Side side, double floor, std::vector<std::string> key = {});

  // Throws on invariant violations (floor >= 1, unknown columns, bad
  // coordinate index, ...).
  void Validate() const;
  ProblemSpec WithSide(Side s) const;
  ProblemSpec WithDataset(Dataset ds) const;
};

// Everything a solver needs, collapsed to the stratum level.
struct PreparedProblem {
  StratumTable strata;
  RatioModel model;
  Eigen::VectorXd weights;                 // w_s = n_s / N
  std::vector<std::size_t> equality_rows;  // indices into spec.constraints
  Eigen::MatrixXd g_means;                 // m x S within-stratum means of g_j
  Eigen::VectorXd targets;                 // m
  Eigen::MatrixXd constraint_matrix;       // m x d: row j maps alpha -> E_Q^[theta g_j]

  std::size_t n() const { return strata.total(); }
  // E_Q^[theta g_j] - c_j for every equality constraint.
  Eigen::VectorXd ConstraintResidual(const Eigen::VectorXd& alpha) const {
    return constraint_matrix * alpha - targets;
  }
};

PreparedProblem Prepare(const ProblemSpec& spec);

}  // namespace shiftbound

#endif  // SHIFTBOUND_PROBLEM_H_
