#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "instances.h"
#include "shiftbound/error.h"
#include "shiftbound/inference.h"
#include "shiftbound/m_estimation.h"
#include "shiftbound/solve.h"
#include "test_util.h"

using namespace shiftbound;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using shiftbound::testing::MakeDataset;

namespace {

double DirectVariance(const VectorXd& z) {
  const double m = z.mean();
  return (z.array() - m).square().sum() / double(z.size() - 1);
}

BoundEstimate Estimate(double value, double sigma2, std::size_t n, Side side) {
  BoundEstimate b;
  b.value = value;
  b.sigma2 = sigma2;
  b.n = n;
  b.side = side;
  return b;
}

}  // namespace

TEST_CASE("normal quantiles") {
  CHECK(StandardNormalQuantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(StandardNormalQuantile(0.75) == doctest::Approx(0.674490).epsilon(1e-6));
  CHECK(StandardNormalQuantile(0.5) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("normal confidence intervals") {
  Interval zero = NormalCi(0.3, 0.0, 50, 0.95);
  CHECK(zero.lo == 0.3);
  CHECK(zero.hi == 0.3);
  Interval ci = NormalCi(1.0, 1.0, 100, 0.95);
  CHECK(ci.hi - 1.0 == doctest::Approx(1.959964 / 10).epsilon(1e-6));
  CHECK(1.0 - ci.lo == doctest::Approx(1.959964 / 10).epsilon(1e-6));
  CHECK(NormalCi(0.0, 1.0, 100, 0.5).hi == doctest::Approx(0.674490 / 10).epsilon(1e-6));
  // Width scales as 1 / sqrt(N).
  CHECK(NormalCi(0.0, 2.0, 400, 0.9).width() * 2 ==
        doctest::Approx(NormalCi(0.0, 2.0, 100, 0.9).width()).epsilon(1e-14));
  Interval lower = NormalCi(1.0, 1.0, 100, 0.95, CiMode::kLowerOneSided);
  CHECK(lower.hi == 1.0);
  CHECK(1.0 - lower.lo == doctest::Approx(StandardNormalQuantile(0.95) / 10));
  Interval upper = NormalCi(1.0, 1.0, 100, 0.95, CiMode::kUpperOneSided);
  CHECK(upper.lo == 1.0);
  CHECK_THROWS_AS(NormalCi(0, 1, 10, 1.0), Error);
  CHECK_THROWS_AS(NormalCi(0, 1, 10, 0.0), Error);
}

TEST_CASE("sample variance") {
  CHECK(SampleVariance(Eigen::Vector4d(1, 2, 3, 4)) == doctest::Approx(5.0 / 3.0));
  CHECK_THROWS_AS(SampleVariance(VectorXd::Ones(1)), Error);
}

TEST_CASE("convex variance on a four-sample instance") {
  testing::StratumInstance in;
  in.counts = {1, 1, 1, 1};
  in.h = Eigen::Vector4d(0.0, 1.0, 0.5, 0.25);
  in.g = Eigen::RowVector4d(1, 0, 1, 0);
  in.targets = VectorXd::Constant(1, 0.5);
  ProblemSpec spec = in.Spec(false, Side::kLower);
  PreparedProblem prep = Prepare(spec);
  VectorXd theta = Eigen::Vector4d(0.5, 1.5, 0.5, 1.5);
  VectorXd duals = Eigen::Vector2d(0.2, -0.7);  // normalization first
  // Z_i = theta_i h_i + sum_j lambda_j (theta_i g_ij - c_j), lambda = -duals.
  VectorXd z(4);
  for (int i = 0; i < 4; ++i) {
    z[i] = theta[i] * in.h[i] - 0.2 * (theta[i] - 1.0) + 0.7 * (theta[i] * in.g(0, i) - 0.5);
  }
  const double v = VarianceConvex(spec, prep, theta, duals, 0.0);
  CHECK(v == doctest::Approx(DirectVariance(z)).epsilon(1e-12));

  testing::StratumInstance shifted = in;
  shifted.targets[0] = 0.9;
  ProblemSpec spec2 = shifted.Spec(false, Side::kLower);
  CHECK(VarianceConvex(spec2, Prepare(spec2), theta, duals, 0.0) ==
        doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("constant ratio on a constant outcome has zero variance") {
  testing::StratumInstance in;
  in.counts = {3, 4};
  in.h = Eigen::Vector2d(0.4, 0.4);
  in.g.resize(0, 2);
  in.targets.resize(0);
  ProblemSpec spec = in.Spec(false, Side::kLower);
  CHECK(VarianceConvex(spec, Prepare(spec), VectorXd::Ones(2), VectorXd::Zero(1), 0.4) ==
        doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("sandwich covariance under homoskedastic noise") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  const int n = 40000;
  const double sigma = 0.5;
  MatrixXd x(n, 2);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1;
    x(i, 1) = z(rng);
    y[i] = 0.3 + 0.8 * x(i, 1) + sigma * z(rng);
  }
  FittedM fit = WeightedOls(x, y, VectorXd::Ones(n));
  MatrixXd s = SandwichCov(fit, VectorXd::Ones(n), PerSampleGradient(MFamily::kLinear, x, y, fit.beta));
  MatrixXd expected = sigma * sigma * (x.transpose() * x / n).inverse();
  CHECK((s - expected).cwiseAbs().maxCoeff() <= 0.05 * expected.cwiseAbs().maxCoeff());
}

TEST_CASE("sandwich covariance of an exact fit is zero") {
  MatrixXd x(5, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4;
  VectorXd y = x * Eigen::Vector2d(1, -2);
  FittedM fit = WeightedOls(x, y, VectorXd::Ones(5));
  MatrixXd s = SandwichCov(fit, VectorXd::Ones(5), PerSampleGradient(MFamily::kLinear, x, y, fit.beta));
  CHECK(s.cwiseAbs().maxCoeff() < 1e-20);
}

TEST_CASE("doubling a weight and duplicating the row share the bread") {
  MatrixXd x(4, 2);
  x << 1, 0.5, 1, -1, 1, 2, 1, 0;
  VectorXd y = Eigen::Vector4d(1, 0, 2, 0.5);
  MatrixXd xd(5, 2);
  xd << x, x.row(2);
  VectorXd yd(5);
  yd << y, y[2];
  FittedM weighted = WeightedOls(x, y, Eigen::Vector4d(1, 1, 2, 1), 5.0);
  FittedM duplicated = WeightedOls(xd, yd, VectorXd::Ones(5));
  CHECK((weighted.hessian - duplicated.hessian).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((weighted.beta - duplicated.beta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("m-bound variance terms") {
  MatrixXd sandwich(2, 2);
  sandwich << 2.0, 0.3, 0.3, 1.0;
  VectorXd e = Eigen::Vector2d(0, 1);
  VectorXd theta = Eigen::Vector4d(0.5, 1.5, 1.0, 1.0);
  MatrixXd g(4, 2);
  g << 1, 0, 1, 1, 1, 0, 1, 1;
  bool ignored = false;
  CHECK(VarianceMBound(sandwich, e, theta, g, VectorXd::Zero(2), true, &ignored) ==
        doctest::Approx(1.0));
  CHECK_FALSE(ignored);
  CHECK(VarianceMBound(MatrixXd::Zero(2, 2), e, theta, g, VectorXd::Zero(2), false, &ignored) == 0.0);
  CHECK(ignored);
  // One constraint with multiplier 0.4 next to the normalization.
  VectorXd duals = Eigen::Vector2d(0.0, 0.4);
  VectorXd term = theta.cwiseProduct(g.col(1)) * 0.4;
  CHECK(VarianceMBound(sandwich, e, theta, g, duals, true) ==
        doctest::Approx(1.0 + DirectVariance(term)).epsilon(1e-12));
}

TEST_CASE("identification interval") {
  IdentificationInterval flat =
      MakeIdentificationInterval(Estimate(0.2, 0, 100, Side::kLower), Estimate(0.6, 0, 100, Side::kUpper), 0.95);
  CHECK(flat.outer.lo == 0.2);
  CHECK(flat.outer.hi == 0.6);
  IdentificationInterval point =
      MakeIdentificationInterval(Estimate(0.5, 1, 100, Side::kLower), Estimate(0.5, 1, 100, Side::kUpper), 0.95);
  CHECK(0.5 - point.outer.lo == doctest::Approx(point.outer.hi - 0.5));
  CHECK(point.outer.hi - 0.5 == doctest::Approx(StandardNormalQuantile(0.95) / 10));
  CHECK_THROWS_AS(MakeIdentificationInterval(Estimate(0.6, 0, 10, Side::kLower),
                                             Estimate(0.2, 0, 10, Side::kUpper), 0.95),
                  Error);
}

TEST_CASE("sample splitting") {
  std::mt19937_64 rng(5);
  Dataset ds = testing::RandomBinary({"A", "B"}, 4, rng);
  auto folds = SampleSplit(ds, 2, 1);
  REQUIRE(folds.size() == 2);
  CHECK(folds[0].rows() == 2);
  CHECK(folds[1].rows() == 2);
  CHECK(SampleSplit(ds, 1, 9).front().values() == ds.values());
  CHECK_THROWS_AS(SampleSplit(ds, 5, 1), Error);

  // Folds of a table with distinct rows partition the rows.
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 23; ++i) rows.push_back({double(i)});
  Dataset ids = MakeDataset({"I"}, rows, {0});
  auto parts = SampleSplit(ids, 4, 7);
  std::vector<double> seen;
  std::size_t lo = 100, hi = 0;
  for (const auto& p : parts) {
    lo = std::min(lo, p.rows());
    hi = std::max(hi, p.rows());
    for (std::size_t i = 0; i < p.rows(); ++i) seen.push_back(p.at(i, 0));
  }
  CHECK(hi - lo <= 1);
  std::sort(seen.begin(), seen.end());
  CHECK(seen.size() == 23);
  for (int i = 0; i < 23; ++i) CHECK(seen[std::size_t(i)] == double(i));
  auto again = SampleSplit(ids, 4, 7);
  for (std::size_t k = 0; k < 4; ++k) CHECK(again[k].values() == parts[k].values());
}

TEST_CASE("bootstrap indices are reproducible") {
  CHECK(BootstrapIndices(50, 3) == BootstrapIndices(50, 3));
  CHECK(BootstrapIndices(50, 3) != BootstrapIndices(50, 4));
  for (auto i : BootstrapIndices(50, 3)) CHECK(i < 50);
}

TEST_CASE("summaries") {
  EndpointSummary s = Summarize({1, 2, 3, 4, 5});
  CHECK(s.mean == 3.0);
  CHECK(s.std == doctest::Approx(std::sqrt(2.5)));
  CHECK(s.p_lo <= s.mean);
  CHECK(s.p_hi >= s.mean);
  EndpointSummary flat = Summarize({0.4, 0.4, 0.4});
  CHECK(flat.std == 0.0);
}

TEST_CASE("bootstrap of identical rows has no spread") {
  testing::StratumInstance in;
  in.counts = {6, 6};
  in.h = Eigen::Vector2d(0.2, 0.8);
  in.g = Eigen::RowVector2d(1, 0);
  in.targets = VectorXd::Constant(1, 0.3);
  ProblemSpec spec = in.Spec(false, Side::kLower);
  BootstrapResult one = BootstrapBounds(spec, 1, 4, SolveOptions{});
  BootstrapResult again = BootstrapBounds(spec, 1, 4, SolveOptions{});
  REQUIRE(one.replicates.size() == 1);
  CHECK(one.replicates[0].lower.value == again.replicates[0].lower.value);

  // Every row identical: a single stratum, every resample the same.
  testing::StratumInstance same;
  same.counts = {10};
  same.h = VectorXd::Constant(1, 0.5);
  same.g.resize(0, 1);
  same.targets.resize(0);
  BootstrapResult flat = BootstrapBounds(same.Spec(false, Side::kLower), 5, 1, SolveOptions{});
  CHECK(flat.lower.std == 0.0);
  CHECK(flat.upper.std == 0.0);
  CHECK(flat.infeasible == 0);
}

TEST_CASE("bootstrap with no feasible replicate") {
  testing::StratumInstance in;
  in.counts = {5, 5};
  in.h = Eigen::Vector2d(0, 1);
  in.g = Eigen::RowVector2d(1, 1);
  in.targets = VectorXd::Constant(1, 3.0);
  try {
    BootstrapBounds(in.Spec(false, Side::kLower), 2, 1, SolveOptions{});
    FAIL("expected AllReplicatesInfeasible");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAllReplicatesInfeasible);
  }
}
