#include "lska/backbone.hpp"

#include <cmath>

#include "lska/rng.hpp"

namespace lska {

std::string_view to_string(Capacity c) {
  switch (c) {
    case Capacity::Tiny: return "tiny";
    case Capacity::Small: return "small";
    case Capacity::Base: return "base";
  }
  return "?";
}

std::optional<Capacity> capacity_from_string(std::string_view name) {
  if (name == "tiny") return Capacity::Tiny;
  if (name == "small") return Capacity::Small;
  if (name == "base") return Capacity::Base;
  return std::nullopt;
}

ModelConfig ModelConfig::make(Capacity capacity, AttentionVariant variant, KernelSpec spec,
                              int num_classes, uint64_t seed) {
  validate_attention_spec(variant, spec);
  ModelConfig cfg;
  cfg.capacity = capacity;
  cfg.variant = variant;
  cfg.spec = spec;
  cfg.num_classes = num_classes;
  cfg.seed = seed;

  std::array<int, 4> channels{};
  std::array<int, 4> depths{};
  const std::array<int, 4> expansion{8, 8, 4, 4};
  switch (capacity) {
    case Capacity::Tiny:
      channels = {32, 64, 160, 256};
      depths = {3, 3, 5, 2};
      break;
    case Capacity::Small:
      channels = {64, 128, 320, 512};
      depths = {2, 2, 4, 2};
      break;
    case Capacity::Base:
      channels = {64, 128, 320, 512};
      depths = {3, 3, 12, 3};
      break;
  }
  for (int s = 0; s < 4; ++s) {
    cfg.stages[s].stride = s == 0 ? 4 : 2;
    cfg.stages[s].down_kernel = s == 0 ? 7 : 3;
    cfg.stages[s].channels = channels[s];
    cfg.stages[s].expansion = expansion[s];
    cfg.stages[s].depth = depths[s];
  }
  return cfg;
}

namespace {

void init_linear(Linear& lin, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(lin.in));
  for (double& w : lin.weights) w = rng.uniform(-bound, bound);
  for (double& b : lin.bias) b = 0.0;
}

VanBlock build_block(int channels, int expansion, AttentionVariant variant,
                     const KernelSpec& spec, Rng& rng) {
  VanBlock b;
  b.bn1 = BatchNorm::identity(channels);
  b.proj1 = ConvKernel::pointwise(channels, channels, /*with_bias=*/true);
  b.proj1.init_uniform(rng);
  b.attn = build_attention(variant, spec, channels, rng.next_u64());
  // Inside the backbone the attention's channel mix carries a bias.
  b.attn.layers.back().bias.assign(channels, 0.0);
  b.proj2 = ConvKernel::pointwise(channels, channels, /*with_bias=*/true);
  b.proj2.init_uniform(rng);
  b.ls1.assign(channels, 0.01);

  b.bn2 = BatchNorm::identity(channels);
  const int hidden = expansion * channels;
  b.ffn_expand = ConvKernel::pointwise(channels, hidden, /*with_bias=*/true);
  b.ffn_expand.init_uniform(rng);
  b.ffn_dw = ConvKernel::depthwise(hidden, 3, 3, /*dilation=*/1, /*with_bias=*/true);
  b.ffn_dw.init_uniform(rng);
  b.ffn_project = ConvKernel::pointwise(hidden, channels, /*with_bias=*/true);
  b.ffn_project.init_uniform(rng);
  b.ls2.assign(channels, 0.01);
  return b;
}

}  // namespace

VanModel build_van(const ModelConfig& config) {
  validate_attention_spec(config.variant, config.spec);
  VanModel m;
  m.config = config;
  Rng rng(config.seed);

  m.stem = ConvKernel::dense(3, config.stages[0].channels, config.stages[0].down_kernel,
                             config.stages[0].stride, config.stages[0].down_kernel / 2,
                             /*with_bias=*/true);
  m.stem.init_uniform(rng);
  m.stem_bn = BatchNorm::identity(config.stages[0].channels);

  for (int s = 0; s < 4; ++s) {
    const StageSpec& spec = config.stages[s];
    VanStage& stage = m.stages[s];
    if (s > 0) {
      stage.has_downsample = true;
      stage.down = ConvKernel::dense(config.stages[s - 1].channels, spec.channels,
                                     spec.down_kernel, spec.stride, spec.down_kernel / 2,
                                     /*with_bias=*/true);
      stage.down.init_uniform(rng);
      stage.down_bn = BatchNorm::identity(spec.channels);
    }
    for (int i = 0; i < spec.depth; ++i) {
      stage.blocks.push_back(
          build_block(spec.channels, spec.expansion, config.variant, config.spec, rng));
    }
  }

  m.head.in = config.stages[3].channels;
  m.head.out = config.num_classes;
  m.head.weights.assign(static_cast<size_t>(m.head.in) * m.head.out, 0.0);
  m.head.bias.assign(m.head.out, 0.0);
  init_linear(m.head, rng);
  return m;
}

namespace {

// One code path drives both the eager forward (with MAC instrumentation) and
// the tape recording; the contexts adapt the primitive calls.
struct EagerCtx {
  MacCounter* macs;
  using V = Tensor;

  V dw(const V& x, const ConvKernel& k) { return dw_conv(x, k, macs); }
  V pw(const V& x, const ConvKernel& k) { return pointwise_conv(x, k, macs); }
  V dense(const V& x, const ConvKernel& k) { return dense_conv(x, k, macs); }
  V bn(const V& x, const BatchNorm& b) {
    if (macs) macs->aux_ops += x.size();
    return batch_norm_frozen(x, b);
  }
  V act(const V& x) {
    if (macs) macs->aux_ops += x.size();
    return gelu(x);
  }
  V scale(const V& x, std::span<const double> lambda) {
    if (macs) macs->aux_ops += x.size();
    return scale_channels(x, lambda);
  }
  V attention(const AttentionModule& attn, const V& x) { return attn.forward(x, macs); }
  V add(const V& a, const V& b) {
    if (!(a.dims() == b.dims())) {
      throw ShapeError("add: dims mismatch " + a.dims().str() + " vs " + b.dims().str());
    }
    if (macs) macs->aux_ops += a.size();
    Tensor out(a.dims());
    for (long long i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
  }
  V gap(const V& x) {
    if (macs) macs->aux_ops += x.size();
    const auto [n, c, h, w] = x.dims();
    Tensor out(Dims{n, c, 1, 1});
    const long long plane = static_cast<long long>(h) * w;
    for (int ni = 0; ni < n; ++ni) {
      for (int ci = 0; ci < c; ++ci) {
        const double* src = x.data() + x.index(ni, ci, 0, 0);
        double sum = 0.0;
        for (long long i = 0; i < plane; ++i) sum += src[i];
        out.at(ni, ci, 0, 0) = sum / static_cast<double>(plane);
      }
    }
    return out;
  }
  V linear(const V& x, const Linear& lin) {
    const auto [n, c, h, w] = x.dims();
    if (h != 1 || w != 1 || c != lin.in) {
      throw ShapeError("linear: expected (N," + std::to_string(lin.in) + ",1,1), got " +
                       x.dims().str());
    }
    if (macs) {
      macs->macs += static_cast<long long>(n) * lin.out * lin.in;
      if (!lin.bias.empty()) macs->aux_ops += static_cast<long long>(n) * lin.out;
    }
    Tensor out(Dims{n, lin.out, 1, 1});
    for (int ni = 0; ni < n; ++ni) {
      for (int oi = 0; oi < lin.out; ++oi) {
        double acc = lin.bias.empty() ? 0.0 : lin.bias[oi];
        const double* wrow = lin.weights.data() + static_cast<size_t>(oi) * lin.in;
        for (int ii = 0; ii < lin.in; ++ii) acc += wrow[ii] * x.at(ni, ii, 0, 0);
        out.at(ni, oi, 0, 0) = acc;
      }
    }
    return out;
  }
};

struct TapeCtx {
  Tape& tape;
  using V = ValueId;

  V dw(V x, const ConvKernel& k) { return tape.dw_conv(x, k); }
  V pw(V x, const ConvKernel& k) { return tape.pointwise_conv(x, k); }
  V dense(V x, const ConvKernel& k) { return tape.dense_conv(x, k); }
  V bn(V x, const BatchNorm& b) { return tape.batch_norm_frozen(x, b); }
  V act(V x) { return tape.gelu(x); }
  V scale(V x, std::span<const double> lambda) { return tape.scale_channels(x, lambda); }
  V attention(const AttentionModule& attn, V x) { return attn.forward(tape, x); }
  V add(V a, V b) { return tape.add(a, b); }
  V gap(V x) { return tape.global_avg_pool(x); }
  V linear(V x, const Linear& lin) { return tape.linear(x, lin); }
};

template <class Ctx>
typename Ctx::V run_block(Ctx& ctx, const VanBlock& block, typename Ctx::V x) {
  auto y = ctx.bn(x, block.bn1);
  y = ctx.pw(y, block.proj1);
  y = ctx.act(y);
  y = ctx.attention(block.attn, y);
  y = ctx.pw(y, block.proj2);
  x = ctx.add(x, ctx.scale(y, block.ls1));

  auto z = ctx.bn(x, block.bn2);
  z = ctx.pw(z, block.ffn_expand);
  z = ctx.dw(z, block.ffn_dw);
  z = ctx.act(z);
  z = ctx.pw(z, block.ffn_project);
  return ctx.add(x, ctx.scale(z, block.ls2));
}

template <class Ctx>
typename Ctx::V run_features(Ctx& ctx, const VanModel& m, typename Ctx::V x) {
  x = ctx.dense(x, m.stem);
  x = ctx.bn(x, m.stem_bn);
  for (const VanStage& stage : m.stages) {
    if (stage.has_downsample) {
      x = ctx.dense(x, stage.down);
      x = ctx.bn(x, stage.down_bn);
    }
    for (const VanBlock& block : stage.blocks) x = run_block(ctx, block, x);
  }
  return x;
}

}  // namespace

Tensor VanModel::features(const Tensor& images, MacCounter* macs) const {
  EagerCtx ctx{macs};
  return run_features(ctx, *this, images);
}

ValueId VanModel::features(Tape& tape, ValueId images) const {
  TapeCtx ctx{tape};
  return run_features(ctx, *this, images);
}

Tensor VanModel::forward(const Tensor& images, MacCounter* macs) const {
  EagerCtx ctx{macs};
  Tensor x = run_features(ctx, *this, images);
  return ctx.linear(ctx.gap(x), head);
}

ValueId VanModel::forward(Tape& tape, ValueId images) const {
  TapeCtx ctx{tape};
  ValueId x = run_features(ctx, *this, images);
  return ctx.linear(ctx.gap(x), head);
}

Tensor block_forward(const VanBlock& block, const Tensor& x, MacCounter* macs) {
  EagerCtx ctx{macs};
  return run_block(ctx, block, x);
}

long long VanModel::count_params() const {
  auto bn_params = [](const BatchNorm& bn) {
    return static_cast<long long>(bn.gamma.size() + bn.beta.size());
  };
  long long total = stem.param_count() + bn_params(stem_bn);
  for (const VanStage& stage : stages) {
    if (stage.has_downsample) total += stage.down.param_count() + bn_params(stage.down_bn);
    for (const VanBlock& b : stage.blocks) {
      total += bn_params(b.bn1) + b.proj1.param_count() + b.attn.param_count() +
               b.proj2.param_count() + static_cast<long long>(b.ls1.size());
      total += bn_params(b.bn2) + b.ffn_expand.param_count() + b.ffn_dw.param_count() +
               b.ffn_project.param_count() + static_cast<long long>(b.ls2.size());
    }
  }
  return total + head.param_count();
}

Tensor input_gradient(const VanModel& model, const Tensor& images) {
  Tape tape;
  const ValueId in = tape.leaf(images);
  const ValueId out = model.features(tape, in);
  const Tensor& feat = tape.value(out);
  const auto [n, c, h, w] = feat.dims();
  Tensor upstream(feat.dims());
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) upstream.at(ni, ci, h / 2, w / 2) = 1.0;
  }
  tape.backward(out, upstream, /*with_param_grads=*/false);
  return tape.grad(in);
}

}  // namespace lska
