#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lska/backbone.hpp"

namespace lska {

struct LayerCost {
  std::string layer;
  long long params = 0;
  long long macs = 0;
};

// Parameter / multiply-accumulate totals. 1 MAC is displayed as 1 FLOP;
// elementwise work is reported separately in aux_ops.
struct CostReport {
  long long params = 0;
  long long macs = 0;
  long long aux_ops = 0;
  long long n_pixels = 0;
  std::vector<LayerCost> breakdown;

  double gflops() const { return static_cast<double>(macs) / 1e9; }
};

// Closed-form attention module parameters, biases excluded:
//   LKA-trivial  k^2*C + C^2          LSKA-trivial  2k*C + C^2
//   LKA          (2d-1)^2*C + floor(k/d)^2*C + C^2
//   LSKA         2(2d-1)*C + 2*floor(k/d)*C + C^2
long long attention_params_analytic(AttentionVariant variant, const KernelSpec& spec, int channels);

// attention_params_analytic * H * W
long long attention_flops_analytic(AttentionVariant variant, const KernelSpec& spec, int channels,
                                   int height, int width);

// Per-layer saving factors of LSKA over LKA: ((2d-1)/2, floor(k/d)/2).
std::pair<double, double> savings_ratio(int k, int d);

// Analytic whole-model walk at the given input size. Pure arithmetic over the
// configuration; never builds tensors.
CostReport model_cost(const ModelConfig& config, int height, int width);

// Ground-truth counters: run the real forward pass with MAC accumulation.
CostReport instrumented_module_cost(const AttentionModule& module, int height, int width,
                                    uint64_t input_seed = 1);
CostReport instrumented_model_cost(const VanModel& model, int height, int width,
                                   uint64_t input_seed = 1);

}  // namespace lska
