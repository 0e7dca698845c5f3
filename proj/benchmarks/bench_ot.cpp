#include <benchmark/benchmark.h>

#include "lipattn/generators.hpp"
#include "lipattn/ot.hpp"

namespace {

using namespace lipattn;

void BM_Wasserstein2(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DiscreteMeasure mu = DiscreteMeasure::empirical(random_ball(n, 3, 1.0, 1));
  const DiscreteMeasure nu = DiscreteMeasure::empirical(random_ball(n, 3, 1.0, 2));
  for (auto _ : state) benchmark::DoNotOptimize(wasserstein_p(mu, nu, 2.0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Wasserstein2)->RangeMultiplier(2)->Range(4, 64)->Complexity();

}  // namespace
