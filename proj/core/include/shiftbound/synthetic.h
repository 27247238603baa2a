#ifndef SHIFTBOUND_SYNTHETIC_H_
#define SHIFTBOUND_SYNTHETIC_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shiftbound/dataset.h"
#include "shiftbound/problem.h"
#include "shiftbound/strata.h"

namespace shiftbound {

// Known data-generating processes. Every column except the continuous
// outcome of the regression substitute is discrete, and selection R depends
// on (X1, X2) only.
//
// BinarySelection (columns Y, Y2, A, X1, X2, R):
//   X1 ~ Categorical(x1_probs) on {0,1,2}, X2 ~ Ber(p_x2),
//   A ~ Ber(s(X2 - X1)), Y ~ Ber(s(2A - X1 + X2)),
//   Y2 ~ Ber(s((X1 + X2)/2 - A)), R ~ Ber(s(X1 - X2)), s = inverse logit.
//
// RegressionSubstitute (columns Y, Yb, Y2, A, X1, X2, R):
//   X1 ~ Categorical(x1_probs), X2 ~ Ber(p_x2),
//   A ~ Ber(s(-0.1 + 0.4 X1 - 0.8 X2)),
//   Y = 0.5 + 1.2 A - 0.6 [X1=1] - 1.1 [X1=2] + 0.8 X2 + N(0, 1),
//   Yb ~ Ber(s(-0.4 - 0.9 A + 0.7 [X1=1] + 1.2 [X1=2] - 0.5 X2)),
//   Y2 ~ Ber(s(-0.3 + 0.3 X1 - 0.5 A + 0.4 X2)),
//   R ~ Ber(s(-0.3 + 0.9 X1 - 1.2 X2)).
struct SyntheticDGP {
  enum class Kind { kBinarySelection, kRegressionSubstitute };

  Kind kind = Kind::kBinarySelection;
  std::array<double, 3> x1_probs{0.5, 0.3, 0.2};
  double p_x2 = 0.4;

  static SyntheticDGP BinarySelection();
  static SyntheticDGP RegressionSubstitute();

  std::string Name() const;
  // Columns of the full sample (R last) and of the observed sample (no R).
  std::vector<ColumnSpec> FullSchema() const;
  std::vector<ColumnSpec> ObservedSchema() const;
  // Discrete observed columns, in schema order.
  std::vector<std::string> DiscreteColumns() const;
};

// Generating coefficients of A in the regression substitute.
inline constexpr double kSubstituteLinearA = 1.2;
inline constexpr double kSubstituteLogisticA = -0.9;

struct SimulatedData {
  Dataset full;      // N rows including R
  Dataset observed;  // rows with R = 1, without R
};

// Deterministic given the seed.
SimulatedData Simulate(const SyntheticDGP& dgp, std::size_t n, std::uint64_t seed);

// One point of the discrete observed-column support under P.
struct SupportPoint {
  std::vector<int> values;  // DiscreteColumns() order
  double p = 0.0;           // P mass
  double selection = 0.0;   // Pr(R = 1 | point)
};

std::vector<SupportPoint> EnumerateSupport(const SyntheticDGP& dgp);

// Pr(R = 1) under P.
double SelectionRate(const SyntheticDGP& dgp);

// E_P[g] by enumeration. Throws ContinuousSupport when g involves a
// continuous column.
double ExactMoment(const SyntheticDGP& dgp, const Expr& g);

// f(P) by enumeration for Mean, ConditionalMean, MCoefficient and
// DiscreteATE estimands over discrete columns. Throws ContinuousSupport.
double TrueValueExact(const SyntheticDGP& dgp, const Estimand& estimand);

struct McEstimate {
  double value = 0.0;
  double se = 0.0;
};

// f(P) from an n-row sample of the full population.
McEstimate TrueValueMonteCarlo(const SyntheticDGP& dgp, const Estimand& estimand, std::size_t n,
                               std::uint64_t seed);

// Exact P mass of each stratum of a table keyed by discrete observed columns
// (marginalizing columns outside the key).
Eigen::VectorXd StratumProbabilities(const SyntheticDGP& dgp, const StratumTable& strata);

// Chi-square divergence of the true stratum distribution from the empirical
// stratum weights. Throws SupportViolation when either side has a stratum the
// other lacks.
double RhoOmniscient(const SyntheticDGP& dgp, const StratumTable& strata);

}  // namespace shiftbound

#endif  // SHIFTBOUND_SYNTHETIC_H_
