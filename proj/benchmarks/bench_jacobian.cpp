#include <benchmark/benchmark.h>

#include "lipattn/attention.hpp"
#include "lipattn/generators.hpp"
#include "lipattn/jacobian.hpp"
#include "lipattn/spectral.hpp"

namespace {

using namespace lipattn;

void BM_SelfAttention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 32;
  const AttentionParams p = random_params(d, d, 1.0, 1);
  const TokenSequence x = random_ball(n, d, 2.0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(self_attention(x, p));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SelfAttention)->RangeMultiplier(4)->Range(8, 512)->Complexity();

void BM_UnmaskedJvp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 32;
  const AttentionParams p = random_params(d, d, 1.0, 1);
  const JacobianOperator j = JacobianOperator::unmasked(random_ball(n, d, 2.0, 2), p);
  const Matrix dx = random_ball(n, d, 1.0, 3).matrix();
  for (auto _ : state) benchmark::DoNotOptimize(j.jvp(dx));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_UnmaskedJvp)->RangeMultiplier(4)->Range(8, 512)->Complexity();

void BM_MaskedVjp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 32;
  const AttentionParams p = random_params(d, d, 1.0, 1);
  const JacobianOperator j = JacobianOperator::masked(random_ball(n, d, 2.0, 2), p);
  const Matrix dy = random_ball(n, d, 1.0, 3).matrix();
  for (auto _ : state) benchmark::DoNotOptimize(j.vjp(dy));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MaskedVjp)->RangeMultiplier(4)->Range(8, 512)->Complexity();

void BM_PowerIteration(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 16;
  const AttentionParams p = random_params(d, d, 1.0, 1);
  const JacobianOperator j = JacobianOperator::unmasked(random_ball(n, d, 2.0, 2), p);
  PowerIterationOptions opts;
  opts.tol = 1e-10;
  std::size_t iterations = 0;
  for (auto _ : state) {
    const PowerIterationResult r = local_lipschitz(j, opts);
    iterations = r.iterations;
    benchmark::DoNotOptimize(r.lipschitz);
  }
  state.counters["iterations"] = static_cast<double>(iterations);
}
BENCHMARK(BM_PowerIteration)->RangeMultiplier(4)->Range(8, 512)->Unit(benchmark::kMillisecond);

}  // namespace
