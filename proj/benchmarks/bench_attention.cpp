// Wall-time comparison of the four attention designs at a stage-1-like
// width, the desk-scale counterpart of the throughput tables.
#include <benchmark/benchmark.h>

#include "lska/attention.hpp"
#include "lska/backbone.hpp"
#include "lska/rng.hpp"

namespace {

using namespace lska;

constexpr int kChannels = 32;
constexpr int kHw = 56;

void ModuleForward(benchmark::State& state) {
  const AttentionVariant variant = static_cast<AttentionVariant>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  const AttentionModule module =
      build_attention(variant, KernelSpec{k, *dilation_for_kernel(k)}, kChannels, 1);
  Rng rng(1);
  const Tensor x = random_uniform(Dims{1, kChannels, kHw, kHw}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(module.forward(x));
  }
  state.SetLabel(std::string(to_string(variant)) + " k=" + std::to_string(k));
}

void TinyBlockForward(benchmark::State& state) {
  const AttentionVariant variant = static_cast<AttentionVariant>(state.range(0));
  const ModelConfig cfg = ModelConfig::make(Capacity::Tiny, variant, KernelSpec{23, 3});
  const VanModel model = build_van(cfg);
  Rng rng(1);
  const Tensor x = random_uniform(Dims{1, cfg.stages[0].channels, kHw, kHw}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(block_forward(model.stages[0].blocks[0], x));
  }
  state.SetLabel(std::string(to_string(variant)));
}

void RegisterVariantsByKernel(benchmark::internal::Benchmark* bench) {
  for (int v = 0; v < 4; ++v) {
    for (int k : {7, 23, 65}) bench->Args({v, k});
  }
}

}  // namespace

BENCHMARK(ModuleForward)->Apply(RegisterVariantsByKernel)->Unit(benchmark::kMillisecond);
BENCHMARK(TinyBlockForward)->Arg(0)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
