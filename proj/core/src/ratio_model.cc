#include "shiftbound/ratio_model.h"

#include <algorithm>
#include <map>

#include "shiftbound/error.h"

namespace shiftbound {
namespace {

std::vector<std::size_t> KeyPositions(const StratumTable& strata,
                                      const std::vector<std::string>& cols) {
  std::vector<std::size_t> out;
  for (const auto& c : cols) {
    auto pos = strata.KeyPosition(c);
    if (!pos) {
      throw Error(ErrorCode::kUnknownColumn,
                  "ratio-model column '" + c + "' is not part of the stratum key");
    }
    out.push_back(*pos);
  }
  return out;
}

std::string ProfileLabel(const std::vector<std::string>& cols, const std::vector<int>& prof) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ",";
    out += cols[i] + "=" + std::to_string(prof[i]);
  }
  return out;
}

// Incidence of each stratum onto the distinct sub-profiles over `cols`.
// Returns (d x S incidence, labels).
std::pair<Eigen::MatrixXd, std::vector<std::string>> ProjectionIncidence(
    const StratumTable& strata, const std::vector<std::string>& cols, const std::string& prefix) {
  auto pos = KeyPositions(strata, cols);
  std::map<std::vector<int>, std::size_t> index;
  std::vector<std::vector<int>> sub(strata.size());
  for (std::size_t s = 0; s < strata.size(); ++s) {
    for (std::size_t p : pos) sub[s].push_back(strata.stratum(s).profile[p]);
    index.emplace(sub[s], 0);
  }
  std::vector<std::string> labels;
  std::size_t k = 0;
  for (auto& [prof, id] : index) {
    id = k++;
    labels.push_back(prefix + ProfileLabel(cols, prof));
  }
  Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(index.size()),
                                              static_cast<Eigen::Index>(strata.size()));
  for (std::size_t s = 0; s < strata.size(); ++s) {
    inc(static_cast<Eigen::Index>(index[sub[s]]), static_cast<Eigen::Index>(s)) = 1.0;
  }
  return {std::move(inc), std::move(labels)};
}

void CheckAlpha(const RatioModel& model, const Eigen::VectorXd& alpha) {
  if (static_cast<std::size_t>(alpha.size()) != model.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "alpha has length " + std::to_string(alpha.size()) + ", model dimension is " +
                    std::to_string(model.dim()));
  }
}

void CheckStrata(const RatioModel& model, const StratumTable& strata) {
  if (strata.size() != model.strata_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "stratum table does not match the bound model");
  }
}

}  // namespace

std::string_view RatioModelKindName(RatioModelKind kind) {
  switch (kind) {
    case RatioModelKind::kTabular: return "tabular";
    case RatioModelKind::kSeparable: return "separable";
    case RatioModelKind::kTargeted: return "targeted";
    case RatioModelKind::kLinearBasis: return "basis";
  }
  return "unknown";
}

RatioModelSpec RatioModelSpec::Tabular(std::vector<std::string> key, double floor) {
  RatioModelSpec s;
  s.kind = RatioModelKind::kTabular;
  s.key_columns = std::move(key);
  s.floor = floor;
  return s;
}

RatioModelSpec RatioModelSpec::Targeted(std::vector<std::string> key, double floor) {
  RatioModelSpec s = Tabular(std::move(key), floor);
  s.kind = RatioModelKind::kTargeted;
  return s;
}

RatioModelSpec RatioModelSpec::Separable(std::vector<std::string> a, std::vector<std::string> b,
                                         double floor) {
  RatioModelSpec s;
  s.kind = RatioModelKind::kSeparable;
  s.group_a = std::move(a);
  s.group_b = std::move(b);
  s.floor = floor;
  return s;
}

RatioModelSpec RatioModelSpec::LinearBasis(std::vector<Expr> basis, double floor) {
  RatioModelSpec s;
  s.kind = RatioModelKind::kLinearBasis;
  s.basis = std::move(basis);
  s.floor = floor;
  return s;
}

std::vector<std::string> RatioModelSpec::Columns() const {
  std::vector<std::string> out;
  auto add = [&](const std::string& c) {
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  };
  for (const auto& c : key_columns) add(c);
  for (const auto& c : group_a) add(c);
  for (const auto& c : group_b) add(c);
  for (const auto& e : basis) {
    for (const auto& c : e.Columns()) add(c);
  }
  return out;
}

RatioModel RatioModel::Bind(const RatioModelSpec& spec, const StratumTable& strata,
                            const Dataset& ds) {
  if (!(spec.floor >= 0.0 && spec.floor < 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "ratio floor must lie in [0, 1)");
  }
  switch (spec.kind) {
    case RatioModelKind::kTabular:
    case RatioModelKind::kTargeted: {
      if (spec.key_columns.empty()) {
        throw Error(ErrorCode::kEmptyStratumKey, "ratio model needs key columns");
      }
      auto [inc, labels] = ProjectionIncidence(strata, spec.key_columns, "");
      return RatioModel(spec, std::move(inc), 0, std::move(labels));
    }
    case RatioModelKind::kSeparable: {
      if (spec.group_a.empty() || spec.group_b.empty()) {
        throw Error(ErrorCode::kEmptyStratumKey, "separable model needs two column groups");
      }
      auto [inc_a, lab_a] = ProjectionIncidence(strata, spec.group_a, "A:");
      auto [inc_b, lab_b] = ProjectionIncidence(strata, spec.group_b, "B:");
      Eigen::MatrixXd jac(inc_a.rows() + inc_b.rows(), inc_a.cols());
      jac << inc_a, inc_b;
      lab_a.insert(lab_a.end(), lab_b.begin(), lab_b.end());
      return RatioModel(spec, std::move(jac), static_cast<std::size_t>(inc_a.rows()),
                        std::move(lab_a));
    }
    case RatioModelKind::kLinearBasis: {
      if (spec.basis.empty()) throw Error(ErrorCode::kDimensionMismatch, "empty basis");
      for (const auto& e : spec.basis) KeyPositions(strata, e.Columns());
      Eigen::MatrixXd jac(static_cast<Eigen::Index>(spec.basis.size()),
                          static_cast<Eigen::Index>(strata.size()));
      std::vector<std::string> labels;
      for (std::size_t k = 0; k < spec.basis.size(); ++k) {
        labels.push_back(spec.basis[k].ToString());
        for (std::size_t s = 0; s < strata.size(); ++s) {
          // Basis terms only read key columns, so any row of the stratum works.
          jac(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s)) =
              EvalExprRow(spec.basis[k], ds, strata.stratum(s).rows.front());
        }
      }
      return RatioModel(spec, std::move(jac), 0, std::move(labels));
    }
  }
  throw Error(ErrorCode::kDimensionMismatch, "unknown ratio model kind");
}

Eigen::VectorXd RatioModel::Theta(const Eigen::VectorXd& alpha) const {
  CheckAlpha(*this, alpha);
  return jacobian_.transpose() * alpha;
}

Eigen::VectorXd RatioModel::ParamLowerBounds() const {
  if (!IsBox()) throw Error(ErrorCode::kUnsupportedForBasis, "basis model has no box bounds");
  const double per_param = kind() == RatioModelKind::kSeparable ? floor() / 2.0 : floor();
  return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim()), per_param);
}

Eigen::VectorXd InitUniform(const RatioModel& model) {
  const auto d = static_cast<Eigen::Index>(model.dim());
  switch (model.kind()) {
    case RatioModelKind::kTabular:
    case RatioModelKind::kTargeted:
      return Eigen::VectorXd::Ones(d);
    case RatioModelKind::kSeparable:
      return Eigen::VectorXd::Constant(d, 0.5);
    case RatioModelKind::kLinearBasis: {
      const auto& basis = model.spec().basis;
      for (std::size_t k = 0; k < basis.size(); ++k) {
        if (basis[k].IsConstant()) {
          Eigen::VectorXd alpha = Eigen::VectorXd::Zero(d);
          alpha[static_cast<Eigen::Index>(k)] = 1.0;
          return alpha;
        }
      }
      throw Error(ErrorCode::kNoConstantBasis, "basis has no constant element");
    }
  }
  return Eigen::VectorXd::Ones(d);
}

Eigen::VectorXd ThetaValues(const RatioModel& model, const Eigen::VectorXd& alpha,
                            const StratumTable& strata) {
  CheckStrata(model, strata);
  return model.Theta(alpha);
}

Eigen::MatrixXd ThetaJacobian(const RatioModel& model, const Eigen::VectorXd& alpha,
                              const StratumTable& strata) {
  CheckStrata(model, strata);
  CheckAlpha(model, alpha);
  return model.jacobian();
}

Eigen::VectorXd ProjectFloor(const RatioModel& model, const Eigen::VectorXd& alpha) {
  if (!model.IsBox()) {
    throw Error(ErrorCode::kUnsupportedForBasis,
                "basis floor is enforced by penalty, not projection");
  }
  CheckAlpha(model, alpha);
  return alpha.cwiseMax(model.ParamLowerBounds());
}

}  // namespace shiftbound
