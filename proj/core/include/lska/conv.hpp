#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "lska/rng.hpp"
#include "lska/tensor.hpp"

namespace lska {

enum class KernelKind {
  Depthwise2d,
  DepthwiseHorizontal,  // 1 x kw
  DepthwiseVertical,    // kh x 1
  Pointwise,            // 1x1 dense channel mix
  Dense,                // full C_out x C_in x kh x kw, strided
};

// Multiply-accumulate tally. `macs` counts convolution multiply-adds only;
// `aux_ops` counts elementwise work (norm, activation, scaling, products).
struct MacCounter {
  long long macs = 0;
  long long aux_ops = 0;
};

struct ConvKernel {
  KernelKind kind = KernelKind::Depthwise2d;
  int channels_in = 0;
  int channels_out = 0;
  int kh = 1;
  int kw = 1;
  int dilation = 1;  // depth-wise kinds only
  int stride = 1;    // dense kind only; depth-wise is fixed stride 1
  int pad = 0;       // dense kind only; depth-wise uses same-padding
  // Depth-wise: channels*kh*kw, laid out [c][ky][kx].
  // Pointwise/dense: out*in*kh*kw, laid out [o][i][ky][kx].
  std::vector<double> weights;
  std::vector<double> bias;  // per output channel; empty = no bias

  static ConvKernel depthwise(int channels, int kh, int kw, int dilation = 1,
                              bool with_bias = false);
  static ConvKernel pointwise(int channels_in, int channels_out, bool with_bias);
  static ConvKernel dense(int channels_in, int channels_out, int k, int stride, int pad,
                          bool with_bias);

  void init_uniform(Rng& rng);  // U[-1/sqrt(fan_in), +1/sqrt(fan_in)], bias zeroed
  int fan_in() const;
  long long weight_count() const { return static_cast<long long>(weights.size()); }
  long long param_count() const { return weight_count() + static_cast<long long>(bias.size()); }
  bool is_depthwise() const {
    return kind == KernelKind::Depthwise2d || kind == KernelKind::DepthwiseHorizontal ||
           kind == KernelKind::DepthwiseVertical;
  }
};

// Depth-wise cross-correlation, stride 1, zero same-padding of
// dilation*(k-1)/2 per axis. Output dims equal input dims.
Tensor dw_conv(const Tensor& x, const ConvKernel& kernel, MacCounter* macs = nullptr);

// 1x1 dense channel mix; spatial dims preserved.
Tensor pointwise_conv(const Tensor& x, const ConvKernel& kernel, MacCounter* macs = nullptr);

// General dense conv with stride and explicit zero padding (dilation 1).
Tensor dense_conv(const Tensor& x, const ConvKernel& kernel, MacCounter* macs = nullptr);

// Maximum receptive field of a stride-1 cascade: 1 + sum_i d_i * (k_i - 1).
// `chain` entries are (kernel extent, dilation).
int receptive_field_analytic(std::span<const std::pair<int, int>> chain);

struct SupportExtent {
  int height = 0;
  int width = 0;
  bool conclusive = true;  // false when nonzero response touches the border
};

// Bounding-box extent of the response to a unit impulse placed at the centre
// of channel 0. Magnitudes are summed over output channels; `conclusive` is
// false when the response touches the map border (support may be clipped).
SupportExtent impulse_support(const std::function<Tensor(const Tensor&)>& forward,
                              Dims input_dims);

}  // namespace lska
