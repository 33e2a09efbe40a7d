// Microbenchmarks for the convolution primitives: square depth-wise kernels
// against the separable pair they factor into, plus the dense stem conv.
#include <benchmark/benchmark.h>

#include "lska/conv.hpp"
#include "lska/rng.hpp"

namespace {

using namespace lska;

constexpr int kChannels = 32;
constexpr int kHw = 56;

Tensor bench_input(int channels, int hw) {
  Rng rng(1);
  return random_uniform(Dims{1, channels, hw, hw}, rng);
}

void DwSquare(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  ConvKernel kernel = ConvKernel::depthwise(kChannels, k, k);
  Rng rng(2);
  kernel.init_uniform(rng);
  const Tensor x = bench_input(kChannels, kHw);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dw_conv(x, kernel));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(kChannels) * kHw * kHw * k * k);
}

void DwSeparablePair(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  ConvKernel horizontal = ConvKernel::depthwise(kChannels, 1, k);
  ConvKernel vertical = ConvKernel::depthwise(kChannels, k, 1);
  Rng rng(2);
  horizontal.init_uniform(rng);
  vertical.init_uniform(rng);
  const Tensor x = bench_input(kChannels, kHw);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dw_conv(dw_conv(x, horizontal), vertical));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(kChannels) * kHw * kHw * 2 * k);
}

void Pointwise(benchmark::State& state) {
  ConvKernel kernel = ConvKernel::pointwise(kChannels, kChannels, false);
  Rng rng(2);
  kernel.init_uniform(rng);
  const Tensor x = bench_input(kChannels, kHw);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pointwise_conv(x, kernel));
  }
}

void DenseStem(benchmark::State& state) {
  ConvKernel kernel = ConvKernel::dense(3, 32, 7, 4, 3, true);
  Rng rng(2);
  kernel.init_uniform(rng);
  const Tensor x = bench_input(3, 112);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dense_conv(x, kernel));
  }
}

}  // namespace

BENCHMARK(DwSquare)->Arg(7)->Arg(23)->Arg(35)->Unit(benchmark::kMillisecond);
BENCHMARK(DwSeparablePair)->Arg(7)->Arg(23)->Arg(35)->Arg(65)->Unit(benchmark::kMillisecond);
BENCHMARK(Pointwise)->Unit(benchmark::kMillisecond);
BENCHMARK(DenseStem)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
