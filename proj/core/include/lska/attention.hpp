#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lska/autograd.hpp"
#include "lska/conv.hpp"

namespace lska {

enum class AttentionVariant {
  LkaTrivial,   // dw k*k, pw 1x1
  LskaTrivial,  // dw 1*k, dw k*1, pw 1x1
  Lka,          // dw (2d-1)^2, dw-dilated floor(k/d)^2, pw 1x1
  Lska,         // dw 1*(2d-1), dw (2d-1)*1, dw-dil 1*floor(k/d), dw-dil floor(k/d)*1, pw
};

constexpr AttentionVariant kAllVariants[] = {
    AttentionVariant::LkaTrivial,
    AttentionVariant::LskaTrivial,
    AttentionVariant::Lka,
    AttentionVariant::Lska,
};

std::string_view to_string(AttentionVariant v);
std::optional<AttentionVariant> variant_from_string(std::string_view name);

struct KernelSpec {
  int k = 0;  // maximum receptive field, odd
  int d = 1;  // dilation rate; ignored by the trivial variants
};

// Built-in kernel/dilation pairing: 7->2, 11->2, 23->3, 35->3, 53->3, 65->3.
std::optional<int> dilation_for_kernel(int k);
constexpr int kSweepKernels[] = {7, 11, 23, 35, 53, 65};

// Throws ConfigError naming the offending extent when the derived kernel
// extents are invalid for the variant.
void validate_attention_spec(AttentionVariant variant, const KernelSpec& spec);

// Per-axis (extent, dilation) cascade of the depth-wise stack, used for
// receptive-field arithmetic. Both axes are identical by construction.
std::vector<std::pair<int, int>> attention_axis_chain(AttentionVariant variant,
                                                      const KernelSpec& spec);

struct AttentionModule {
  AttentionVariant variant = AttentionVariant::Lka;
  KernelSpec spec;
  int channels = 0;
  std::vector<ConvKernel> layers;  // depth-wise layers in order, then the pointwise

  // A = pointwise(dw...(F)); output = A (.) F
  Tensor forward(const Tensor& f, MacCounter* macs = nullptr) const;
  ValueId forward(Tape& tape, ValueId f) const;

  // The attention map before the Hadamard product.
  Tensor attention_map(const Tensor& f, MacCounter* macs = nullptr) const;

  long long param_count() const;
  void fill_weights(double value);
};

AttentionModule build_attention(AttentionVariant variant, const KernelSpec& spec, int channels,
                                uint64_t seed);

// Max elementwise |LKA(outer-product kernels) - LSKA| over `trials` random
// draws of 1-D kernels and inputs of size 2k x 2k.
double rank1_equivalence_check(const KernelSpec& spec, int channels, int trials, uint64_t seed);

}  // namespace lska
