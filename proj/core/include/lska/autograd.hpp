#pragma once

#include <memory>
#include <span>
#include <vector>

#include "lska/conv.hpp"
#include "lska/tensor.hpp"

namespace lska {

// Dense layer applied to pooled features (N,C,1,1) -> (N,K,1,1).
struct Linear {
  int in = 0;
  int out = 0;
  std::vector<double> weights;  // out x in
  std::vector<double> bias;     // out
  long long param_count() const {
    return static_cast<long long>(weights.size() + bias.size());
  }
};

using ValueId = int;

// Reverse-mode tape over the forward primitives. Record a forward sequence,
// then call backward() with an upstream gradient at the root; input gradients
// are queried per value, parameter gradients per recording op.
//
// Kernels/norm parameters are captured by reference and must outlive the tape.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  ValueId leaf(Tensor x);

  ValueId dw_conv(ValueId x, const ConvKernel& kernel);
  ValueId pointwise_conv(ValueId x, const ConvKernel& kernel);
  ValueId dense_conv(ValueId x, const ConvKernel& kernel);
  ValueId gelu(ValueId x);
  ValueId batch_norm_frozen(ValueId x, const BatchNorm& bn);
  ValueId scale_channels(ValueId x, std::span<const double> lambda);
  ValueId hadamard(ValueId a, ValueId b);
  ValueId add(ValueId a, ValueId b);
  ValueId global_avg_pool(ValueId x);       // (N,C,H,W) -> (N,C,1,1)
  ValueId linear(ValueId x, const Linear& layer);

  const Tensor& value(ValueId id) const;

  // Reverse sweep from `root` seeded with `upstream` (dims must match the
  // root value). Gradients of earlier backward() calls are discarded.
  // Parameter gradients are skipped when `with_param_grads` is false.
  void backward(ValueId root, const Tensor& upstream, bool with_param_grads = true);

  bool has_grad(ValueId id) const;
  const Tensor& grad(ValueId id) const;

  // Parameter gradients of the op that produced `id`. For convs: weights/bias.
  // For batch_norm_frozen: gamma in `weights`, beta in `bias`. For
  // scale_channels: lambda in `weights`. For linear: weights/bias.
  struct ParamGrads {
    std::vector<double> weights;
    std::vector<double> bias;
  };
  const ParamGrads& param_grads(ValueId id) const;

  int num_values() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lska
