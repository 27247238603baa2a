#include <benchmark/benchmark.h>

#include <random>

#include "shiftbound/simplex.h"

namespace {

// Stratum-style LP: normalization plus m moment rows over s strata, with
// targets taken from an interior point so the problem is feasible.
shiftbound::LinearProgram RandomLp(int s, int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  shiftbound::LinearProgram lp;
  Eigen::VectorXd w = Eigen::VectorXd::NullaryExpr(s, [&] { return 0.1 + u(rng); });
  w /= w.sum();
  lp.objective = Eigen::VectorXd::NullaryExpr(s, [&] { return u(rng); }).cwiseProduct(w);
  lp.a_eq.resize(m + 1, s);
  lp.a_eq.row(0) = w.transpose();
  for (int j = 1; j <= m; ++j) {
    for (int k = 0; k < s; ++k) lp.a_eq(j, k) = w[k] * (u(rng) < 0.5 ? 1.0 : 0.0);
  }
  const Eigen::VectorXd theta = Eigen::VectorXd::NullaryExpr(s, [&] { return 0.5 + u(rng); });
  lp.b_eq = lp.a_eq * theta;
  lp.lower = Eigen::VectorXd::Constant(s, 0.3);
  return lp;
}

void BM_SimplexStrata(benchmark::State& state) {
  const auto lp = RandomLp(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(shiftbound::SimplexSolve(lp));
}
BENCHMARK(BM_SimplexStrata)->ArgsProduct({{12, 48, 192, 768}, {4, 16}});

}  // namespace

BENCHMARK_MAIN();
