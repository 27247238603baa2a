#include <benchmark/benchmark.h>

#include "shiftbound/config.h"
#include "shiftbound/inference.h"
#include "shiftbound/solve.h"

using namespace shiftbound;

namespace {

void BM_BootstrapTargeted(benchmark::State& state) {
  ExperimentConfig c;
  c.ratio_model.kind = "targeted";
  c.dataset.n = static_cast<std::size_t>(state.range(0));
  const ResolvedProblem r = ResolveProblem(c);
  for (auto _ : state) benchmark::DoNotOptimize(BootstrapBounds(r.spec, 5, 0, c.solver));
}
BENCHMARK(BM_BootstrapTargeted)->Arg(5000)->Arg(20000)->Arg(80000)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
