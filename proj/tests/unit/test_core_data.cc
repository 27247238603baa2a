#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>

#include "shiftbound/dataset.h"
#include "shiftbound/error.h"
#include "shiftbound/expr.h"
#include "shiftbound/problem.h"
#include "shiftbound/strata.h"
#include "shiftbound/synthetic.h"
#include "test_util.h"

using namespace shiftbound;
using shiftbound::testing::MakeDataset;
namespace fs = std::filesystem;

namespace {

fs::path WriteTemp(const std::string& name, const std::string& text) {
  fs::path dir = fs::temp_directory_path() / "shiftbound_core_data";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIoError;
}

double Logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("load a small binary csv") {
  auto p = WriteTemp("ok.csv", "A,Y\n0,1\n1,1\n1,0\n");
  Dataset ds = LoadDataset(p, {ColumnSpec::Discrete("A"), ColumnSpec::Discrete("Y")});
  CHECK(ds.rows() == 3);
  CHECK(ds.cols() == 2);
  CHECK(ds.DiscreteColumnNames() == std::vector<std::string>{"A", "Y"});
  CHECK(ds.Column("Y")[2] == 0.0);
}

TEST_CASE("header order may differ from the schema") {
  auto p = WriteTemp("order.csv", "Y,A\n1,0\n0,1\n");
  Dataset ds = LoadDataset(p, {ColumnSpec::Discrete("A"), ColumnSpec::Discrete("Y")});
  CHECK(ds.Column("A")[0] == 0.0);
  CHECK(ds.Column("Y")[0] == 1.0);
}

TEST_CASE("ingestion errors") {
  const std::vector<ColumnSpec> schema{ColumnSpec::Discrete("A"), ColumnSpec::Discrete("Y")};
  CHECK(CodeOf([&] { LoadDataset(WriteTemp("missing.csv", "A,Y\n0,1\n1,\n"), schema); }) ==
        ErrorCode::kMissingValue);
  CHECK(CodeOf([&] { LoadDataset(WriteTemp("two.csv", "A,Y\n2,1\n"), schema); }) ==
        ErrorCode::kNonIntegerDiscrete);
  CHECK(CodeOf([&] { LoadDataset(WriteTemp("frac.csv", "A,Y\n0.5,1\n"), schema); }) ==
        ErrorCode::kNonIntegerDiscrete);
  CHECK(CodeOf([&] { LoadDataset(WriteTemp("extra.csv", "A,Y,Z\n0,1,1\n"), schema); }) ==
        ErrorCode::kUnknownColumn);
  CHECK(CodeOf([&] { LoadDataset(WriteTemp("short.csv", "A\n0\n"), schema); }) ==
        ErrorCode::kUnknownColumn);
  CHECK(CodeOf([&] { LoadDataset("/nonexistent/x.csv", schema); }) == ErrorCode::kIoError);
}

TEST_CASE("write and reload preserves values") {
  Dataset ds = MakeDataset({"A", "X", "Z"}, {{0, 2, 0.125}, {1, 0, -3.5}, {1, 1, 1e-7}}, {2, 3, 0});
  auto p = fs::temp_directory_path() / "shiftbound_core_data" / "roundtrip.csv";
  WriteDataset(ds, p);
  Dataset back = LoadDataset(p, ds.columns());
  CHECK(back.values() == ds.values());
}

TEST_CASE("strata counts and ordering") {
  Dataset ds = MakeDataset({"A", "X"}, {{0, 0}, {0, 0}, {1, 1}});
  StratumTable t = BuildStrata(ds, {"A", "X"});
  REQUIRE(t.size() == 2);
  CHECK(t.stratum(0).count == 2);
  CHECK(t.stratum(1).count == 1);
  CHECK(t.stratum(0).profile == std::vector<int>{0, 0});

  Dataset four = MakeDataset({"A", "X"}, {{1, 1}, {0, 1}, {1, 0}, {0, 0}, {1, 1}});
  StratumTable t4 = BuildStrata(four, {"A", "X"});
  REQUIRE(t4.size() == 4);
  std::size_t total = 0;
  for (std::size_t s = 0; s < t4.size(); ++s) {
    total += t4.stratum(s).count;
    if (s > 0) CHECK(t4.stratum(s - 1).profile < t4.stratum(s).profile);
  }
  CHECK(total == four.rows());
}

TEST_CASE("strata re-expansion reproduces the key-column multiset") {
  std::mt19937_64 rng(3);
  Dataset ds = shiftbound::testing::RandomBinary({"A", "B", "C"}, 200, rng);
  StratumTable t = BuildStrata(ds, {"C", "A"});
  std::map<std::vector<int>, std::size_t> from_rows, from_strata;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    ++from_rows[{static_cast<int>(ds.at(i, 2)), static_cast<int>(ds.at(i, 0))}];
  }
  for (const auto& s : t.strata()) from_strata[s.profile] += s.count;
  CHECK(from_rows == from_strata);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const auto& s = t.stratum(t.StratumOfRow(i));
    CHECK(std::find(s.rows.begin(), s.rows.end(), i) != s.rows.end());
  }
  CHECK(t.Weights().sum() == doctest::Approx(1.0));
}

TEST_CASE("strata over the synthetic support") {
  // Support of (Y, Y2, A, X1, X2): 2 * 2 * 2 * 3 * 2 points.
  SyntheticDGP dgp = SyntheticDGP::BinarySelection();
  CHECK(EnumerateSupport(dgp).size() == 48);
  Dataset ds = Simulate(dgp, 20000, 4).observed;
  StratumTable t = BuildStrata(ds, {"Y", "Y2", "A", "X1", "X2"});
  CHECK(t.size() <= 48);
  CHECK(t.size() >= 40);
  CHECK(t.total() == ds.rows());
}

TEST_CASE("continuous columns cannot key strata") {
  Dataset ds = MakeDataset({"A", "Z"}, {{0, 0.5}, {1, 1.5}}, {2, 0});
  CHECK(CodeOf([&] { BuildStrata(ds, {"A", "Z"}); }) == ErrorCode::kContinuousColumnInKey);
  CHECK(CodeOf([&] { BuildStrata(ds, {"Q"}); }) == ErrorCode::kUnknownColumn);
  CHECK(CodeOf([&] { BuildStrata(ds, {}); }) == ErrorCode::kEmptyStratumKey);
}

TEST_CASE("expression evaluation") {
  Dataset ds = MakeDataset({"Y", "X2", "Y2"}, {{1, 0, 1}, {1, 1, 0}});
  CHECK(EvalExpr(ParseExpr("Y*X2"), ds)[0] == 0.0);
  CHECK(EvalExpr(ParseExpr("Y*X2"), ds)[1] == 1.0);
  CHECK(EvalExpr(ParseExpr("Y2*(1-X2)"), ds)[0] == 1.0);
  CHECK(EvalExpr(ParseExpr("1"), ds) == Eigen::VectorXd::Ones(2));
  CHECK(EvalExpr(Expr::One(), ds) == Eigen::VectorXd::Ones(2));
  CHECK(EvalExprRow(ParseExpr("1-Y2"), ds, 1) == 1.0);
  CHECK(CodeOf([&] { EvalExpr(ParseExpr("Q"), ds); }) == ErrorCode::kUnknownColumn);
  CHECK(CodeOf([] { ParseExpr("Y*"); }) == ErrorCode::kParseError);
  CHECK(CodeOf([] { ParseExpr(""); }) == ErrorCode::kParseError);
}

TEST_CASE("indicator and complement terms") {
  Dataset ds = MakeDataset({"X1", "A"}, {{0, 0}, {1, 1}, {2, 1}}, {3, 2});
  Eigen::VectorXd v = EvalExpr(ParseExpr("X1==2 * A"), ds);
  CHECK(v == Eigen::Vector3d(0, 0, 1));
  CHECK(ParseExpr("X2*(1-Y2)") == Expr::Col("X2") * Expr::Not("Y2"));
  CHECK(ParseExpr(" X1 == 1 ") == Expr::Eq("X1", 1));
  CHECK(ParseExpr(ParseExpr("Y2*(1-X2)*X1==2").ToString()) == ParseExpr("Y2*(1-X2)*X1==2"));
}

TEST_CASE("products of indicators stay binary") {
  std::mt19937_64 rng(11);
  Dataset ds = shiftbound::testing::RandomBinary({"A", "B", "C"}, 100, rng);
  for (const char* e : {"A*B", "A*(1-B)*C", "(1-A)*(1-C)", "A==1*B==0"}) {
    Eigen::VectorXd v = EvalExpr(ParseExpr(e), ds);
    for (Eigen::Index i = 0; i < v.size(); ++i) CHECK((v[i] == 0.0 || v[i] == 1.0));
  }
}

TEST_CASE("normalization constraint") {
  MomentConstraint n = NormalizationConstraint();
  CHECK(n.kind == MomentConstraint::Kind::kMomentEquality);
  CHECK(n.expr.IsConstant());
  CHECK(n.target == 1.0);
  CHECK(n.IsNormalization());

  auto with = WithNormalization({MomentConstraint::Equality(ParseExpr("A"), 0.3)});
  REQUIRE(with.size() == 2);
  CHECK(with.front().IsNormalization());
  CHECK(WithNormalization(with).size() == 2);

  // theta == 1 satisfies it on any sample.
  Dataset ds = MakeDataset({"A"}, {{0}, {1}, {1}});
  CHECK(EvalExpr(n.expr, ds).mean() == doctest::Approx(1.0));
}

TEST_CASE("selection floor") {
  CHECK(SelectionFloor(0.0) == 0.0);
  CHECK(SelectionFloor(0.3) == 0.3);
  CHECK(CodeOf([] { SelectionFloor(1.0); }) == ErrorCode::kOutOfRange);
  CHECK(CodeOf([] { SelectionFloor(-0.1); }) == ErrorCode::kOutOfRange);
}

TEST_CASE("selection rate of the synthetic process by enumeration") {
  const double p1[3] = {0.5, 0.3, 0.2};
  double expected = 0.0;
  for (int x1 = 0; x1 < 3; ++x1) {
    for (int x2 = 0; x2 < 2; ++x2) {
      expected += p1[x1] * (x2 ? 0.4 : 0.6) * Logistic(x1 - x2);
    }
  }
  CHECK(SelectionRate(SyntheticDGP::BinarySelection()) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("problem validation") {
  Dataset ds = MakeDataset({"A", "Y"}, {{0, 1}, {1, 0}, {1, 1}});
  auto model = RatioModelSpec::Tabular({"A", "Y"});
  auto est = Estimand::Mean(ParseExpr("Y"));
  CHECK_NOTHROW(ProblemSpec(ds, {}, est, model, Side::kLower, 0.2).Validate());
  CHECK_THROWS_AS(ProblemSpec(ds, {}, est, model, Side::kLower, 1.0).Validate(), Error);
  ProblemSpec spec(ds, {}, est, model, Side::kLower, 0.0);
  CHECK(spec.constraints.front().IsNormalization());
  auto empty = Estimand::ConditionalMean(ParseExpr("Y"), ParseExpr("A*(1-A)"));
  CHECK(CodeOf([&] { ProblemSpec(ds, {}, empty, model, Side::kLower, 0.0).Validate(); }) ==
        ErrorCode::kEmptyConditionSet);
}
