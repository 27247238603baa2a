#ifndef SHIFTBOUND_RATIO_MODEL_H_
#define SHIFTBOUND_RATIO_MODEL_H_

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shiftbound/dataset.h"
#include "shiftbound/expr.h"
#include "shiftbound/strata.h"

namespace shiftbound {

enum class RatioModelKind { kTabular, kSeparable, kTargeted, kLinearBasis };

std::string_view RatioModelKindName(RatioModelKind kind);

// Declarative description of a density-ratio parameterization. `floor` is the
// lower bound enforced on every stratum's ratio value.
struct RatioModelSpec {
  RatioModelKind kind = RatioModelKind::kTabular;
  std::vector<std::string> key_columns;  // Tabular, Targeted
  std::vector<std::string> group_a;      // Separable
  std::vector<std::string> group_b;      // Separable
  std::vector<Expr> basis;               // LinearBasis
  double floor = 0.0;

  static RatioModelSpec Tabular(std::vector<std::string> key, double floor = 0.0);
  static RatioModelSpec Targeted(std::vector<std::string> key, double floor = 0.0);
  static RatioModelSpec Separable(std::vector<std::string> a, std::vector<std::string> b,
                                  double floor = 0.0);
  static RatioModelSpec LinearBasis(std::vector<Expr> basis, double floor = 0.0);

  // Every column the ratio can depend on.
  std::vector<std::string> Columns() const;
};

// A ratio model bound to a stratum table. All supported kinds are linear in
// their parameters, so theta = J^T alpha with a constant d x S matrix J.
class RatioModel {
 public:
  // The table's key must contain every model column. Basis expressions are
  // evaluated on each stratum's profile (they may only reference key columns).
  static RatioModel Bind(const RatioModelSpec& spec, const StratumTable& strata,
                         const Dataset& ds);

  const RatioModelSpec& spec() const { return spec_; }
  RatioModelKind kind() const { return spec_.kind; }
  double floor() const { return spec_.floor; }
  std::size_t dim() const { return static_cast<std::size_t>(jacobian_.rows()); }
  std::size_t strata_count() const { return static_cast<std::size_t>(jacobian_.cols()); }
  // Number of leading parameters that belong to group A (Separable only).
  std::size_t group_a_dim() const { return group_a_dim_; }

  const Eigen::MatrixXd& jacobian() const { return jacobian_; }
  Eigen::VectorXd Theta(const Eigen::VectorXd& alpha) const;

  // Box models (Tabular, Targeted, Separable) carry per-parameter lower
  // bounds; LinearBasis does not.
  bool IsBox() const { return spec_.kind != RatioModelKind::kLinearBasis; }
  Eigen::VectorXd ParamLowerBounds() const;

  // Labels of each parameter, e.g. "X1=0,X2=1" or "A:A=1".
  const std::vector<std::string>& param_labels() const { return labels_; }

 private:
  RatioModel(RatioModelSpec spec, Eigen::MatrixXd jacobian, std::size_t group_a_dim,
             std::vector<std::string> labels)
      : spec_(std::move(spec)),
        jacobian_(std::move(jacobian)),
        group_a_dim_(group_a_dim),
        labels_(std::move(labels)) {}

  RatioModelSpec spec_;
  Eigen::MatrixXd jacobian_;
  std::size_t group_a_dim_ = 0;
  std::vector<std::string> labels_;
};

// theta == 1 in parameter space. Throws NoConstantBasis.
Eigen::VectorXd InitUniform(const RatioModel& model);

// Per-stratum ratio values. Throws DimensionMismatch.
Eigen::VectorXd ThetaValues(const RatioModel& model, const Eigen::VectorXd& alpha,
                            const StratumTable& strata);

// d x S matrix of d theta_s / d alpha_k. Throws DimensionMismatch.
Eigen::MatrixXd ThetaJacobian(const RatioModel& model, const Eigen::VectorXd& alpha,
                              const StratumTable& strata);

// Clips parameters so that theta >= floor. Separable parts are clipped at
// floor / 2 each. Throws UnsupportedForBasis for LinearBasis.
Eigen::VectorXd ProjectFloor(const RatioModel& model, const Eigen::VectorXd& alpha);

}  // namespace shiftbound

#endif  // SHIFTBOUND_RATIO_MODEL_H_
