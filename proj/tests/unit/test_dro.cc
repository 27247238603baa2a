#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "instances.h"
#include "oracles.h"
#include "shiftbound/convex_bounds.h"
#include "shiftbound/dro.h"
#include "shiftbound/error.h"
#include "shiftbound/synthetic.h"

using namespace shiftbound;
using Eigen::VectorXd;

namespace {

double Chi2(const VectorXd& w, const VectorXd& theta) {
  return w.dot((theta.array() - 1.0).square().matrix());
}

VectorXd RandomSimplex(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  VectorXd v = VectorXd::NullaryExpr(k, [&] { return u(rng); });
  return v / v.sum();
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

}  // namespace

TEST_CASE("chi-square divergence") {
  VectorXd q = Eigen::Vector2d(0.25, 0.75);
  CHECK(Chi2Divergence(q, q) == 0.0);
  CHECK(Chi2Divergence(Eigen::Vector2d(0.5, 0.5), q) == doctest::Approx(1.0 / 3.0));
  CHECK(Chi2Divergence(Eigen::Vector3d(0.2, 0.3, 0.5), Eigen::Vector3d(0.1, 0.6, 0.3)) ==
        doctest::Approx(Chi2Divergence(Eigen::Vector3d(0.5, 0.2, 0.3), Eigen::Vector3d(0.3, 0.1, 0.6))));
  CHECK(CodeOf([] { Chi2Divergence(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(1.0, 0.0)); }) ==
        ErrorCode::kSupportViolation);
  CHECK(CodeOf([] { Chi2Divergence(Eigen::Vector2d(0.5, 0.6), Eigen::Vector2d(0.5, 0.5)); }) ==
        ErrorCode::kOutOfRange);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    VectorXd p = RandomSimplex(rng, 5), r = RandomSimplex(rng, 5);
    CHECK(Chi2Divergence(p, r) > 0.0);
  }
}

TEST_CASE("dro mean bound limits") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    VectorXd w = RandomSimplex(rng, 6);
    VectorXd h = VectorXd::Random(6);
    for (Side side : {Side::kLower, Side::kUpper}) {
      CHECK(std::abs(DroMeanBound({h, w, 0.0, side}).value - w.dot(h)) <= 1e-8);
    }
    CHECK(DroMeanBound({h, w, 1e9, Side::kUpper}).value == doctest::Approx(h.maxCoeff()));
    CHECK(DroMeanBound({h, w, 1e9, Side::kLower}).value == doctest::Approx(h.minCoeff()));
  }
  CHECK(CodeOf([] { DroMeanBound({VectorXd::Ones(2), Eigen::Vector2d(0.5, 0.5), -0.1, Side::kLower}); }) ==
        ErrorCode::kNegativeRho);
}

TEST_CASE("two-atom dro bound matches a grid search") {
  const VectorXd w = Eigen::Vector2d(0.5, 0.5), h = Eigen::Vector2d(0, 1);
  const double rho = 0.25;
  double lo = 1e9, hi = -1e9;
  for (int k = 0; k <= 1000000; ++k) {
    const double p1 = k * 1e-6;
    if (Chi2Divergence(Eigen::Vector2d(1 - p1, p1), w) > rho + 1e-12) continue;
    lo = std::min(lo, p1);
    hi = std::max(hi, p1);
  }
  CHECK(DroMeanBound({h, w, rho, Side::kLower}).value == doctest::Approx(lo).epsilon(1e-6));
  CHECK(DroMeanBound({h, w, rho, Side::kUpper}).value == doctest::Approx(hi).epsilon(1e-6));
  DroSolution up = DroMeanBound({h, w, rho, Side::kUpper});
  CHECK(Chi2Divergence(up.p, w) <= rho + 1e-8);
}

TEST_CASE("larger radius never tightens the bound") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    VectorXd w = RandomSimplex(rng, 5), h = VectorXd::Random(5);
    double prev_lo = w.dot(h), prev_hi = prev_lo;
    for (double rho : {0.01, 0.05, 0.2, 0.7, 2.0, 10.0}) {
      const double lo = DroMeanBound({h, w, rho, Side::kLower}).value;
      const double hi = DroMeanBound({h, w, rho, Side::kUpper}).value;
      CHECK(lo <= prev_lo + 1e-8);
      CHECK(hi >= prev_hi - 1e-8);
      prev_lo = lo;
      prev_hi = hi;
    }
  }
}

TEST_CASE("conditional dro bound matches a grid search on two atoms") {
  const VectorXd w = Eigen::Vector2d(0.6, 0.4);
  const VectorXd m0 = Eigen::Vector2d(0.5, 0.8), m1 = Eigen::Vector2d(0.4, 0.2);
  const double rho = 0.3;
  double lo = 1e9, hi = -1e9;
  for (int k = 0; k <= 1000000; ++k) {
    const double p1 = k * 1e-6;
    VectorXd p = Eigen::Vector2d(1 - p1, p1);
    if (Chi2Divergence(p, w) > rho) continue;
    const double v = p.dot(m1) / p.dot(m0);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(DroConditionalBound(m1, m0, w, rho, Side::kLower).value == doctest::Approx(lo).epsilon(1e-5));
  CHECK(DroConditionalBound(m1, m0, w, rho, Side::kUpper).value == doctest::Approx(hi).epsilon(1e-5));
  CHECK(DroConditionalBound(m1, m0, w, 0.0, Side::kUpper).value ==
        doctest::Approx(w.dot(m1) / w.dot(m0)).epsilon(1e-10));
}

TEST_CASE("observable radius when the constraints pin theta") {
  testing::StratumInstance in;
  in.counts = {4, 6};
  in.h = Eigen::Vector2d(0, 1);
  in.g = Eigen::RowVector2d(1, 0);
  in.targets = VectorXd::Constant(1, 0.4);
  RhoEstimate r = RhoObservable(in.Spec(false, Side::kLower), SolverSettings{});
  CHECK(r.rho == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
}

TEST_CASE("observable radius on a segment is the larger endpoint") {
  testing::StratumInstance in;
  in.counts = {6, 4};
  in.h = Eigen::Vector2d(0, 1);
  in.g.resize(0, 2);
  in.targets.resize(0);
  in.floor = 0.3;
  const VectorXd w = in.Weights();
  VectorXd a(2), b(2);
  a << in.floor, (1 - w[0] * in.floor) / w[1];
  b << (1 - w[1] * in.floor) / w[0], in.floor;
  const double expected = std::max(Chi2(w, a), Chi2(w, b));
  RhoEstimate r = RhoObservable(in.Spec(false, Side::kLower), SolverSettings{});
  CHECK(r.rho == doctest::Approx(expected).epsilon(1e-4));
  CHECK(r.rho >= Chi2(w, r.theta) - 1e-9);
}

TEST_CASE("dro interval at the observable radius contains our bounds") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 8; ++t) {
    testing::StratumInstance in = testing::RandomInstance(rng, 5, 1, 0.1);
    in.c_rows.clear();
    for (int c : in.counts) in.c_rows.push_back(1 + int(rng() % unsigned(c)));
    for (bool conditional : {false, true}) {
      ProblemSpec spec = in.Spec(conditional, Side::kLower);
      BoundEstimate lo = ConvexBound(spec);
      BoundEstimate up = ConvexBound(spec.WithSide(Side::kUpper));
      std::vector<VectorXd> starts{lo.alpha_star, up.alpha_star};
      RhoEstimate r = RhoObservable(spec, SolverSettings{}, starts);
      const VectorXd w = in.Weights();
      CHECK(r.rho >= Chi2(w, lo.theta_star) - 1e-6);
      CHECK(r.rho >= Chi2(w, up.theta_star) - 1e-6);
      DroInterval d = DroBounds(spec, r.rho + 1e-9);
      CHECK(d.lower <= lo.value + 1e-6);
      CHECK(d.upper >= up.value - 1e-6);
    }
  }
}

TEST_CASE("zero radius gives the naive estimate") {
  testing::StratumInstance in;
  in.counts = {3, 5, 2};
  in.h = Eigen::Vector3d(0.1, 0.7, 0.4);
  in.c_rows = {1, 2, 2};
  in.g.resize(0, 3);
  in.targets.resize(0);
  const VectorXd w = in.Weights(), m0 = in.ConditionShare();
  DroInterval mean = DroBounds(in.Spec(false, Side::kLower), 0.0);
  CHECK(std::abs(mean.lower - w.dot(in.h)) <= 1e-8);
  CHECK(std::abs(mean.upper - w.dot(in.h)) <= 1e-8);
  DroInterval cond = DroBounds(in.Spec(true, Side::kLower), 0.0);
  const double naive = w.cwiseProduct(m0).dot(in.h) / w.dot(m0);
  CHECK(std::abs(cond.lower - naive) <= 1e-8);
  CHECK(std::abs(cond.upper - naive) <= 1e-8);
}

TEST_CASE("omniscient radius") {
  SyntheticDGP dgp = SyntheticDGP::BinarySelection();
  const auto cols = dgp.DiscreteColumns();
  // A large sample from P itself sits close to P.
  Dataset full = Simulate(dgp, 400000, 8).full;
  const double rho_p = RhoOmniscient(dgp, BuildStrata(full, cols));
  CHECK(rho_p >= 0.0);
  CHECK(rho_p < 1e-3);
  Dataset obs = Simulate(dgp, 20000, 8).observed;
  const double rho_q = RhoOmniscient(dgp, BuildStrata(obs, cols));
  CHECK(std::isfinite(rho_q));
  CHECK(rho_q > rho_p);
  // A tiny sample misses strata that P charges.
  Dataset tiny = Simulate(dgp, 30, 8).observed;
  CHECK(CodeOf([&] { RhoOmniscient(dgp, BuildStrata(tiny, cols)); }) == ErrorCode::kSupportViolation);
}
