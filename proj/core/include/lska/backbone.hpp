#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "lska/attention.hpp"
#include "lska/autograd.hpp"

namespace lska {

enum class Capacity { Tiny, Small, Base };

std::string_view to_string(Capacity c);
std::optional<Capacity> capacity_from_string(std::string_view name);

struct StageSpec {
  int stride = 2;       // stem 4, later stages 2
  int down_kernel = 3;  // stem 7, later stages 3
  int channels = 0;
  int expansion = 0;
  int depth = 0;
};

struct ModelConfig {
  Capacity capacity = Capacity::Tiny;
  std::array<StageSpec, 4> stages{};
  AttentionVariant variant = AttentionVariant::Lska;
  KernelSpec spec{23, 3};
  int num_classes = 1000;
  uint64_t seed = 0;

  static ModelConfig make(Capacity capacity, AttentionVariant variant, KernelSpec spec,
                          int num_classes = 1000, uint64_t seed = 0);
};

// attention half: x + ls1 .* (proj2(attn(gelu(proj1(bn1(x))))))
// ffn half:       x + ls2 .* (project(gelu(dw3x3(expand(bn2(x))))))
struct VanBlock {
  BatchNorm bn1;
  ConvKernel proj1;
  AttentionModule attn;
  ConvKernel proj2;
  std::vector<double> ls1;
  BatchNorm bn2;
  ConvKernel ffn_expand;
  ConvKernel ffn_dw;
  ConvKernel ffn_project;
  std::vector<double> ls2;
};

struct VanStage {
  bool has_downsample = false;
  ConvKernel down;
  BatchNorm down_bn;
  std::vector<VanBlock> blocks;
};

struct VanModel {
  ModelConfig config;
  ConvKernel stem;
  BatchNorm stem_bn;
  std::array<VanStage, 4> stages;
  Linear head;

  // Stage-4 feature map (pre-pool).
  Tensor features(const Tensor& images, MacCounter* macs = nullptr) const;
  ValueId features(Tape& tape, ValueId images) const;

  // Features -> global average pool -> linear logits.
  Tensor forward(const Tensor& images, MacCounter* macs = nullptr) const;
  ValueId forward(Tape& tape, ValueId images) const;

  // Trainable scalars: conv weights/biases, BN affine, LayerScale, head.
  long long count_params() const;
};

VanModel build_van(const ModelConfig& config);

Tensor block_forward(const VanBlock& block, const Tensor& x, MacCounter* macs = nullptr);

// d(sum_c features[n, c, center])/d(images), same dims as images.
Tensor input_gradient(const VanModel& model, const Tensor& images);

}  // namespace lska
