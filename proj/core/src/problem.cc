#include "shiftbound/problem.h"

#include <algorithm>
#include <cmath>

#include "shiftbound/error.h"

namespace shiftbound {
namespace {

void RequireBinary(const Dataset& ds, const std::string& col) {
  const auto& spec = ds.column(ds.ColumnIndex(col));
  if (spec.kind != ColumnKind::kDiscrete || spec.cardinality != 2) {
    throw Error(ErrorCode::kOutOfRange, "column " + col + " must be binary");
  }
}

}  // namespace

MomentConstraint MomentConstraint::Equality(Expr expr, double target, std::string name) {
  MomentConstraint c;
  c.kind = Kind::kMomentEquality;
  c.name = name.empty() ? expr.ToString() : std::move(name);
  c.expr = std::move(expr);
  c.target = target;
  return c;
}

MomentConstraint MomentConstraint::CovarianceSign(std::string u, std::string v, int sign) {
  MomentConstraint c;
  c.kind = Kind::kCovarianceSign;
  c.name = std::string("cov(") + u + "," + v + ")" + (sign > 0 ? ">=0" : "<=0");
  c.u = std::move(u);
  c.v = std::move(v);
  c.sign = sign > 0 ? +1 : -1;
  return c;
}

MomentConstraint NormalizationConstraint() {
  return MomentConstraint::Equality(Expr::One(), 1.0, "normalization");
}

double SelectionFloor(double p_r1) {
  if (!(p_r1 >= 0.0 && p_r1 < 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "Pr(R=1) must lie in [0, 1)");
  }
  return p_r1;
}

std::vector<MomentConstraint> WithNormalization(std::vector<MomentConstraint> constraints) {
  bool present = std::any_of(constraints.begin(), constraints.end(),
                             [](const MomentConstraint& c) { return c.IsNormalization(); });
  if (!present) constraints.insert(constraints.begin(), NormalizationConstraint());
  return constraints;
}

Estimand Estimand::Mean(Expr h) {
  Estimand e;
  e.kind = Kind::kMean;
  e.h = std::move(h);
  return e;
}

Estimand Estimand::ConditionalMean(Expr h, Expr condition) {
  Estimand e;
  e.kind = Kind::kConditionalMean;
  e.h = std::move(h);
  e.condition = std::move(condition);
  return e;
}

Estimand Estimand::MCoefficient(MFamily family, std::string outcome, std::vector<Expr> design,
                                bool intercept, std::size_t coord_index) {
  Estimand e;
  e.kind = Kind::kMCoefficient;
  e.family = family;
  e.outcome = std::move(outcome);
  e.design = std::move(design);
  e.intercept = intercept;
  e.coord_index = coord_index;
  return e;
}

Estimand Estimand::DiscreteATE(std::string y, std::string a, std::vector<std::string> xs) {
  Estimand e;
  e.kind = Kind::kDiscreteATE;
  e.y_column = std::move(y);
  e.a_column = std::move(a);
  e.x_columns = std::move(xs);
  return e;
}

Eigen::MatrixXd Estimand::DesignMatrix(const Dataset& ds) const {
  const auto n = static_cast<Eigen::Index>(ds.rows());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(DesignDim()));
  Eigen::Index col = 0;
  if (intercept) x.col(col++).setOnes();
  for (const auto& e : design) x.col(col++) = EvalExpr(e, ds);
  return x;
}

std::vector<std::string> Estimand::Columns() const {
  std::vector<std::string> out;
  auto add = [&](const std::string& c) {
    if (!c.empty() && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  };
  for (const auto& c : h.Columns()) add(c);
  for (const auto& c : condition.Columns()) add(c);
  add(outcome);
  for (const auto& e : design) {
    for (const auto& c : e.Columns()) add(c);
  }
  add(y_column);
  add(a_column);
  for (const auto& c : x_columns) add(c);
  return out;
}

std::string Estimand::Describe() const {
  switch (kind) {
    case Kind::kMean: return "E[" + h.ToString() + "]";
    case Kind::kConditionalMean:
      return "E[" + h.ToString() + " | " + condition.ToString() + "]";
    case Kind::kMCoefficient: {
      std::string out = family == MFamily::kLinear ? "ols" : "logit";
      out += "(" + outcome + " ~ ";
      if (intercept) out += "1";
      for (const auto& e : design) out += " + " + e.ToString();
      return out + ")[" + std::to_string(coord_index) + "]";
    }
    case Kind::kDiscreteATE: return "ATE(" + y_column + " | " + a_column + ")";
  }
  return "?";
}

ProblemSpec::ProblemSpec(Dataset ds, std::vector<MomentConstraint> cons, Estimand est,
                         RatioModelSpec model, Side s, double fl, std::vector<std::string> key)
    : dataset(std::move(ds)),
      constraints(WithNormalization(std::move(cons))),
      estimand(std::move(est)),
      ratio_model(std::move(model)),
      side(s),
      floor(fl),
      strata_key(std::move(key)) {
  ratio_model.floor = floor;
}

void ProblemSpec::Validate() const {
  if (!(floor >= 0.0 && floor < 1.0)) throw Error(ErrorCode::kOutOfRange, "floor must be in [0,1)");
  for (const auto& c : constraints) {
    if (c.kind == MomentConstraint::Kind::kMomentEquality) {
      for (const auto& col : c.expr.Columns()) dataset.ColumnIndex(col);
      if (!std::isfinite(c.target)) {
        throw Error(ErrorCode::kOutOfRange, "constraint " + c.name + " has a non-finite target");
      }
    } else {
      dataset.ColumnIndex(c.u);
      dataset.ColumnIndex(c.v);
    }
  }
  for (const auto& col : estimand.Columns()) dataset.ColumnIndex(col);
  switch (estimand.kind) {
    case Estimand::Kind::kMean: break;
    case Estimand::Kind::kConditionalMean: {
      if (EvalExpr(estimand.condition, dataset).sum() <= 0.0) {
        throw Error(ErrorCode::kEmptyConditionSet, estimand.condition.ToString());
      }
      break;
    }
    case Estimand::Kind::kMCoefficient: {
      if (estimand.coord_index >= estimand.DesignDim()) {
        throw Error(ErrorCode::kOutOfRange, "coefficient index outside the design");
      }
      if (estimand.family == MFamily::kLogistic) {
        Eigen::VectorXd y = dataset.Column(estimand.outcome);
        for (Eigen::Index i = 0; i < y.size(); ++i) {
          if (y[i] != 0.0 && y[i] != 1.0) {
            throw Error(ErrorCode::kOutOfRange, "logistic outcome must be 0/1");
          }
        }
      }
      break;
    }
    case Estimand::Kind::kDiscreteATE: {
      RequireBinary(dataset, estimand.y_column);
      RequireBinary(dataset, estimand.a_column);
      for (const auto& x : estimand.x_columns) {
        if (dataset.column(dataset.ColumnIndex(x)).kind != ColumnKind::kDiscrete) {
          throw Error(ErrorCode::kContinuousColumnInKey, x);
        }
      }
      break;
    }
  }
}

ProblemSpec ProblemSpec::WithSide(Side s) const {
  ProblemSpec out = *this;
  out.side = s;
  return out;
}

ProblemSpec ProblemSpec::WithDataset(Dataset ds) const {
  ProblemSpec out = *this;
  out.dataset = std::move(ds);
  return out;
}

PreparedProblem Prepare(const ProblemSpec& spec) {
  spec.Validate();
  std::vector<std::string> key =
      spec.strata_key.empty() ? spec.dataset.DiscreteColumnNames() : spec.strata_key;
  StratumTable strata = BuildStrata(spec.dataset, key);
  RatioModelSpec model_spec = spec.ratio_model;
  model_spec.floor = spec.floor;
  RatioModel model = RatioModel::Bind(model_spec, strata, spec.dataset);

  std::vector<std::size_t> rows;
  for (std::size_t j = 0; j < spec.constraints.size(); ++j) {
    if (spec.constraints[j].kind == MomentConstraint::Kind::kMomentEquality) rows.push_back(j);
  }
  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto s_count = static_cast<Eigen::Index>(strata.size());
  Eigen::MatrixXd g_means(m, s_count);
  Eigen::VectorXd targets(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& c = spec.constraints[rows[static_cast<std::size_t>(j)]];
    g_means.row(j) = strata.Means(EvalExpr(c.expr, spec.dataset)).transpose();
    targets[j] = c.target;
  }
  Eigen::VectorXd w = strata.Weights();
  Eigen::MatrixXd cm = (g_means * w.asDiagonal()) * model.jacobian().transpose();
  return PreparedProblem{std::move(strata), std::move(model), std::move(w), std::move(rows),
                         std::move(g_means), std::move(targets), std::move(cm)};
}

}  // namespace shiftbound
