#include <doctest.h>

#include <cmath>

#include "shiftbound/error.h"
#include "shiftbound/expr.h"
#include "shiftbound/m_estimation.h"
#include "shiftbound/synthetic.h"

using namespace shiftbound;
using Eigen::VectorXd;

namespace {

std::vector<std::string> Names(const Dataset& ds) {
  std::vector<std::string> out;
  for (const auto& c : ds.columns()) out.push_back(c.name);
  return out;
}

}  // namespace

TEST_CASE("simulation is deterministic and drops unselected rows") {
  SyntheticDGP dgp = SyntheticDGP::BinarySelection();
  SimulatedData a = Simulate(dgp, 5000, 42);
  SimulatedData b = Simulate(dgp, 5000, 42);
  CHECK(a.full.values() == b.full.values());
  CHECK(a.observed.values() == b.observed.values());
  CHECK(a.full.rows() == 5000);
  CHECK(Names(a.full) == std::vector<std::string>{"Y", "Y2", "A", "X1", "X2", "R"});
  CHECK(Names(a.observed) == std::vector<std::string>{"Y", "Y2", "A", "X1", "X2"});
  CHECK(a.observed.rows() == std::size_t(a.full.Column("R").sum()));
  CHECK(Simulate(dgp, 5000, 43).full.values() != a.full.values());
}

TEST_CASE("population marginals") {
  SyntheticDGP dgp = SyntheticDGP::BinarySelection();
  Dataset full = Simulate(dgp, 1000000, 7).full;
  CHECK(std::abs(full.Column("X2").mean() - 0.4) <= 0.002);
  CHECK(ExactMoment(dgp, Expr::One()) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ExactMoment(dgp, ParseExpr("X2")) == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("enumeration and monte carlo agree") {
  SyntheticDGP dgp = SyntheticDGP::BinarySelection();
  Estimand cm = Estimand::ConditionalMean(Expr::Col("Y"), Expr::Col("A"));
  const double exact = TrueValueExact(dgp, cm);
  McEstimate mc = TrueValueMonteCarlo(dgp, cm, 1000000, 20211);
  CHECK(std::abs(mc.value - exact) <= 3 * mc.se);
  CHECK(std::abs(mc.value - exact) <= 5e-3);

  for (const char* g : {"Y2*X2", "X2*(1-Y2)", "Y*(1-X2)", "X1==2*A"}) {
    Estimand m = Estimand::Mean(ParseExpr(g));
    McEstimate e = TrueValueMonteCarlo(dgp, m, 1000000, 5);
    CHECK(std::abs(e.value - ExactMoment(dgp, ParseExpr(g))) <= 3 * e.se);
    CHECK(TrueValueExact(dgp, m) == doctest::Approx(ExactMoment(dgp, ParseExpr(g))));
  }
}

TEST_CASE("support enumeration sums to one") {
  SyntheticDGP dgp = SyntheticDGP::BinarySelection();
  double total = 0, sel = 0;
  for (const auto& pt : EnumerateSupport(dgp)) {
    CHECK(pt.p > 0);
    CHECK(pt.selection > 0);
    CHECK(pt.selection < 1);
    total += pt.p;
    sel += pt.p * pt.selection;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(sel == doctest::Approx(SelectionRate(dgp)).epsilon(1e-14));
}

TEST_CASE("regression substitute") {
  SyntheticDGP dgp = SyntheticDGP::RegressionSubstitute();
  const double rate = SelectionRate(dgp);
  CHECK(rate > 0.2);
  CHECK(rate < 0.8);
  CHECK(Simulate(dgp, 1000, 3).observed.values() == Simulate(dgp, 1000, 3).observed.values());

  Dataset full = Simulate(dgp, 1000000, 9).full;
  std::vector<Expr> design{ParseExpr("A"), ParseExpr("X1==1"), ParseExpr("X1==2"), ParseExpr("X2")};
  Estimand lin = Estimand::MCoefficient(MFamily::kLinear, "Y", design, true, 1);
  FittedM ols = WeightedOls(lin.DesignMatrix(full), full.Column("Y"), VectorXd::Ones(Eigen::Index(full.rows())));
  CHECK(std::abs(ols.beta[1] - kSubstituteLinearA) <= 0.01);
  Estimand logit = Estimand::MCoefficient(MFamily::kLogistic, "Yb", design, true, 1);
  FittedM lr = WeightedLogistic(logit.DesignMatrix(full), full.Column("Yb"),
                                VectorXd::Ones(Eigen::Index(full.rows())));
  CHECK(std::abs(lr.beta[1] - kSubstituteLogisticA) <= 0.02);

  try {
    TrueValueExact(dgp, lin);
    FAIL("expected ContinuousSupport");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kContinuousSupport);
  }
  McEstimate mc = TrueValueMonteCarlo(dgp, lin, 200000, 1);
  CHECK(std::abs(mc.value - kSubstituteLinearA) <= 4 * mc.se + 1e-3);
}

TEST_CASE("stratum probabilities marginalize the support") {
  SyntheticDGP dgp = SyntheticDGP::BinarySelection();
  Dataset obs = Simulate(dgp, 20000, 2).observed;
  StratumTable t = BuildStrata(obs, {"X1", "X2"});
  VectorXd p = StratumProbabilities(dgp, t);
  CHECK(p.sum() == doctest::Approx(1.0));
  for (std::size_t s = 0; s < t.size(); ++s) {
    const auto& prof = t.stratum(s).profile;
    const double px1 = dgp.x1_probs[std::size_t(prof[0])];
    CHECK(p[Eigen::Index(s)] == doctest::Approx(px1 * (prof[1] ? 0.4 : 0.6)));
  }
}
