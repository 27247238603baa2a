#include <benchmark/benchmark.h>

#include "shiftbound/config.h"
#include "shiftbound/solve.h"

using namespace shiftbound;

namespace {

ExperimentConfig Base(const std::string& kind, const std::string& model) {
  ExperimentConfig c;
  c.estimand.kind = kind;
  if (kind == "m_coefficient") {
    c.dataset.dgp = "regression-substitute";
    c.estimand.outcome = "Y";
    c.estimand.design = {"A", "X1==1", "X1==2", "X2"};
  }
  c.ratio_model.kind = model;
  return c;
}

void Bound(benchmark::State& state, const ExperimentConfig& config) {
  const ResolvedProblem r = ResolveProblem(config);
  SolveOptions options = config.solver;
  for (auto _ : state) benchmark::DoNotOptimize(SolveBound(r.spec, options));
}

void BM_ConditionalMeanTargeted(benchmark::State& s) { Bound(s, Base("conditional_mean", "targeted")); }
void BM_ConditionalMeanUnrestricted(benchmark::State& s) { Bound(s, Base("conditional_mean", "unrestricted")); }
void BM_OlsCoefficientTargeted(benchmark::State& s) { Bound(s, Base("m_coefficient", "targeted")); }
void BM_OlsCoefficientUnrestricted(benchmark::State& s) { Bound(s, Base("m_coefficient", "unrestricted")); }

BENCHMARK(BM_ConditionalMeanTargeted)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ConditionalMeanUnrestricted)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_OlsCoefficientTargeted)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_OlsCoefficientUnrestricted)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
