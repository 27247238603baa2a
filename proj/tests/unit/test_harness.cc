#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "shiftbound/config.h"
#include "shiftbound/error.h"
#include "shiftbound/experiment.h"
#include "shiftbound/plot.h"
#include "shiftbound/solve.h"
#include "shiftbound/synthetic.h"

using namespace shiftbound;
namespace fs = std::filesystem;

namespace {

fs::path TempDir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / "shiftbound_harness" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t Count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
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

const char* kSmall = R"({
  "name": "small",
  "dataset": {"type": "synthetic", "dgp": "binary-selection", "n": 4000, "seed": 3},
  "estimand": {"kind": "conditional_mean", "h": "Y", "condition": "A==1"},
  "constraints": {"set": "full-race-income"},
  "ratio_model": {"kind": "targeted", "key": ["X1", "X2"]},
  "bootstrap": {"replicates": 2, "seed": 5},
  "dro": {"mode": "both"}
})";

}  // namespace

TEST_CASE("strict config parsing") {
  CHECK(ParseConfigGrid(kSmall).size() == 1);
  CHECK(CodeOf([] { ParseConfigGrid(R"({"name": "x", "bogus": 1})"); }) ==
        ErrorCode::kConfigSchemaError);
  CHECK(CodeOf([] { ParseConfigGrid(R"({"dataset": {"type": "parquet"}})"); }) ==
        ErrorCode::kConfigSchemaError);
  CHECK(CodeOf([] { ParseConfigGrid(R"({"dataset": {"n": "many"}})"); }) ==
        ErrorCode::kConfigSchemaError);
  CHECK(CodeOf([] { ParseConfigGrid("{not json"); }) == ErrorCode::kConfigSchemaError);
  // Synthetic mode takes its targets from the process.
  CHECK(CodeOf([] { ParseConfigGrid(R"({"constraints": {"targets": [0.1, 0.2, 0.3, 0.4]}})"); }) ==
        ErrorCode::kConfigSchemaError);
  CHECK(CodeOf([] {
          ParseConfigGrid(R"({"dataset": {"type": "csv", "path": "x.csv",
                               "schema": [{"name": "Y", "kind": "discrete", "cardinality": 2}]},
                              "constraints": {"set": "stratum-pinning"}})");
        }) == ErrorCode::kConfigSchemaError);
}

TEST_CASE("grid entries override the base") {
  auto grid = ParseConfigGrid(R"({
    "name": "base",
    "dataset": {"n": 1000, "seed": 4},
    "grid": [{"name": "a"}, {"name": "b", "dataset": {"n": 500}, "ratio_model": {"kind": "separable"}}]
  })");
  REQUIRE(grid.size() == 2);
  CHECK(grid[0].name == "a");
  CHECK(grid[0].dataset.n == 1000);
  CHECK(grid[1].dataset.n == 500);
  CHECK(grid[1].dataset.seed == 4);
  CHECK(grid[1].ratio_model.kind == "separable");
  CHECK(CodeOf([] { ParseConfigGrid(R"({"grid": [{"grid": []}]})"); }) == ErrorCode::kConfigSchemaError);
}

TEST_CASE("shipped configs parse") {
  const fs::path dir = SHIFTBOUND_CONFIG_DIR;
  CHECK(LoadConfigGrid(dir / "selection_grid.json").size() == 6);
  CHECK(LoadConfig(dir / "targeted.json").ratio_model.kind == "targeted");
  CHECK(LoadConfig(dir / "regression_substitute.json").estimand.kind == "m_coefficient");
}

TEST_CASE("named constraint sets") {
  ConstraintsConfig c;
  c.set = "full-race-income";
  auto full = NamedConstraintSet(c);
  CHECK(full.size() == 4);
  CHECK(full[0].expr == ParseExpr("Y2*X2"));
  c.set = "unrestricted-base";
  CHECK(NamedConstraintSet(c).size() == 4);
  c.set = "partial-race-income";
  auto partial = NamedConstraintSet(c);
  REQUIRE(partial.size() == 2);
  // The two income-present terms drop out.
  CHECK(partial[0].expr == full[1].expr);
  CHECK(partial[1].expr == full[3].expr);
  c.set = "race-income-outcome";
  auto outcome = NamedConstraintSet(c);
  REQUIRE(outcome.size() == 6);
  CHECK(outcome[4].expr == ParseExpr("Y*X2"));
  CHECK(outcome[5].expr == ParseExpr("Y*(1-X2)"));
  c.set = "none";
  CHECK(NamedConstraintSet(c).empty());
}

TEST_CASE("synthetic targets come from enumeration") {
  ExperimentConfig c = ParseConfigGrid(kSmall).front();
  ResolvedProblem rp = ResolveProblem(c);
  SyntheticDGP dgp = SyntheticDGP::BinarySelection();
  REQUIRE(rp.truth.has_value());
  CHECK(*rp.truth == doctest::Approx(TrueValueExact(dgp, rp.spec.estimand)));
  for (const auto& m : rp.spec.constraints) {
    CHECK(m.target == doctest::Approx(ExactMoment(dgp, m.expr)).epsilon(1e-14));
  }
  CHECK(rp.spec.floor == doctest::Approx(SelectionRate(dgp)));
}

TEST_CASE("unconstrained mean spans the stratum means") {
  auto c = ParseConfigGrid(R"({
    "dataset": {"n": 3000, "seed": 2},
    "selection": {"use_floor": false},
    "estimand": {"kind": "mean", "h": "Y"},
    "constraints": {"set": "none"},
    "ratio_model": {"kind": "unrestricted"}
  })").front();
  ResolvedProblem rp = ResolveProblem(c);
  PreparedProblem prep = Prepare(rp.spec);
  Eigen::VectorXd means = prep.strata.Means(rp.spec.dataset.Column("Y"));
  BoundEstimate lo = SolveBound(rp.spec.WithSide(Side::kLower), c.solver);
  BoundEstimate up = SolveBound(rp.spec.WithSide(Side::kUpper), c.solver);
  CHECK(lo.value == doctest::Approx(means.minCoeff()));
  CHECK(up.value == doctest::Approx(means.maxCoeff()));
}

TEST_CASE("experiment rows, serialization and plot") {
  ExperimentConfig c = ParseConfigGrid(kSmall).front();
  ResultBundle bundle = RunExperiment(c);
  REQUIRE(bundle.experiments.size() == 1);
  const auto& e = bundle.experiments[0];
  CHECK(e.methods.size() == 4);
  CHECK(bundle.rows.size() == (2 - e.infeasible) * 2 + 2 * 2 * 3);
  CHECK(e.naive == doctest::Approx(NaiveEstimate(ResolveProblem(c).spec)));
  for (const auto& r : bundle.rows) {
    if (r.method == "naive") CHECK(r.value == doctest::Approx(e.naive).epsilon(0.2));
    if (r.method != "ours") {
      CHECK(r.sigma2 == 0.0);
      CHECK(r.ci_lo == r.value);
    }
  }

  fs::path dir = TempDir("bundle");
  WriteResultsCsv(bundle, dir / "results.csv");
  WriteResultsJson(bundle, dir / "results.json");
  const std::string csv = Slurp(dir / "results.csv");
  CHECK(csv.rfind("experiment,method,side,replicate,value,sigma2,ci_lo,ci_hi,status,"
                  "restart_spread,constraint_violation\n", 0) == 0);
  CHECK(Count(csv, "\n") == bundle.rows.size() + 1);

  ResultBundle back = ReadResultsJson(dir / "results.json");
  REQUIRE(back.rows.size() == bundle.rows.size());
  for (std::size_t i = 0; i < back.rows.size(); ++i) {
    CHECK(back.rows[i].value == bundle.rows[i].value);
    CHECK(back.rows[i].method == bundle.rows[i].method);
    CHECK(back.rows[i].duals == bundle.rows[i].duals);
  }
  CHECK(back.experiments[0].truth == e.truth);

  const std::string svg = RenderPlot(bundle);
  CHECK(Count(svg, "class=\"panel\"") == 1);
  CHECK(Count(svg, "class=\"glyph-group\"") == 4);
  CHECK(Count(svg, "class=\"truth\"") == 1);
  CHECK(Count(svg, "class=\"naive\"") == 1);
  CHECK(svg == RenderPlot(back));
  EmitPlot(bundle, dir / "a.svg");
  EmitPlot(bundle, dir / "b.svg");
  CHECK(Slurp(dir / "a.svg") == Slurp(dir / "b.svg"));

  ResultBundle no_truth = bundle;
  no_truth.experiments[0].truth.reset();
  CHECK(Count(RenderPlot(no_truth), "class=\"truth\"") == 0);
  CHECK(CodeOf([] { RenderPlot(ResultBundle{}); }) == ErrorCode::kEmptyBundle);
}

TEST_CASE("csv datasets need explicit targets and have no truth") {
  fs::path dir = TempDir("csv");
  SyntheticDGP dgp = SyntheticDGP::BinarySelection();
  WriteDataset(Simulate(dgp, 3000, 1).observed, dir / "obs.csv");
  std::string base = R"({
    "dataset": {"type": "csv", "path": ")" + (dir / "obs.csv").string() + R"(",
                "schema": [{"name": "Y", "kind": "discrete", "cardinality": 2},
                           {"name": "Y2", "kind": "discrete", "cardinality": 2},
                           {"name": "A", "kind": "discrete", "cardinality": 2},
                           {"name": "X1", "kind": "discrete", "cardinality": 3},
                           {"name": "X2", "kind": "discrete", "cardinality": 2}]},
    "selection": {"p_r1": 0.5},
    "bootstrap": {"replicates": 1, "seed": 0},
    "dro": {"mode": "off"},)";
  ConstraintsConfig names;
  std::string targets;
  for (const auto& m : NamedConstraintSet(names)) {
    targets += (targets.empty() ? "" : ", ") + std::to_string(ExactMoment(dgp, m.expr));
  }
  auto good = ParseConfigGrid(base + R"("constraints": {"set": "full-race-income", "targets": [)" +
                              targets + "]}}");
  ResolvedProblem rp = ResolveProblem(good.front());
  CHECK_FALSE(rp.truth.has_value());
  CHECK_FALSE(rp.dgp.has_value());
  ResultBundle bundle = RunExperiment(good.front());
  CHECK(Count(RenderPlot(bundle), "class=\"truth\"") == 0);

  auto missing = ParseConfigGrid(base + R"("constraints": {"set": "full-race-income"}})");
  CHECK(CodeOf([&] { ResolveProblem(missing.front()); }) == ErrorCode::kConfigSchemaError);
  auto no_file = good.front();
  no_file.dataset.path = (dir / "absent.csv").string();
  CHECK(CodeOf([&] { ResolveProblem(no_file); }) == ErrorCode::kDatasetError);
}

TEST_CASE("grid runs are reproducible") {
  auto grid = ParseConfigGrid(R"({
    "dataset": {"n": 3000, "seed": 2},
    "bootstrap": {"replicates": 2, "seed": 1},
    "dro": {"mode": "off"},
    "grid": [{"name": "t", "ratio_model": {"kind": "targeted"}}, {"name": "u"}]
  })");
  fs::path dir = TempDir("grid");
  WriteResultsCsv(RunGrid(grid), dir / "one.csv");
  WriteResultsCsv(RunGrid(grid), dir / "two.csv");
  CHECK(Slurp(dir / "one.csv") == Slurp(dir / "two.csv"));
}
