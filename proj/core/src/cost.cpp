#include "lska/cost.hpp"

#include "lska/rng.hpp"

namespace lska {

long long attention_params_analytic(AttentionVariant variant, const KernelSpec& spec,
                                    int channels) {
  validate_attention_spec(variant, spec);
  const long long c = channels;
  const long long k = spec.k;
  const long long local = 2LL * spec.d - 1;
  const long long remote = spec.k / spec.d;
  switch (variant) {
    case AttentionVariant::LkaTrivial: return k * k * c + c * c;
    case AttentionVariant::LskaTrivial: return 2 * k * c + c * c;
    case AttentionVariant::Lka: return local * local * c + remote * remote * c + c * c;
    case AttentionVariant::Lska: return 2 * local * c + 2 * remote * c + c * c;
  }
  return 0;
}

long long attention_flops_analytic(AttentionVariant variant, const KernelSpec& spec, int channels,
                                   int height, int width) {
  return attention_params_analytic(variant, spec, channels) * static_cast<long long>(height) *
         width;
}

std::pair<double, double> savings_ratio(int k, int d) {
  return {(2.0 * d - 1.0) / 2.0, static_cast<double>(k / d) / 2.0};
}

namespace {

struct CostWalk {
  CostReport report;

  void layer(const std::string& name, long long params, long long macs) {
    report.params += params;
    report.macs += macs;
    report.breakdown.push_back({name, params, macs});
  }
  void aux(long long ops) { report.aux_ops += ops; }
};

// (h + 2p - k) / s + 1, the dims dense_conv actually produces.
int conv_out(int extent, int kernel, int stride, int pad) {
  return (extent + 2 * pad - kernel) / stride + 1;
}

}  // namespace

CostReport model_cost(const ModelConfig& config, int height, int width) {
  validate_attention_spec(config.variant, config.spec);
  CostWalk walk;
  walk.report.n_pixels = static_cast<long long>(height) * width;

  const long long k_local = 2LL * config.spec.d - 1;
  const long long k_remote = config.spec.k / config.spec.d;

  int h = height, w = width;
  int c_in = 3;
  for (int s = 0; s < 4; ++s) {
    const StageSpec& st = config.stages[s];
    const long long c = st.channels;
    const long long e = st.expansion;
    const std::string prefix = "stage" + std::to_string(s + 1);

    // Downsample (the stem for stage 1), then its norm.
    const int dk = st.down_kernel;
    h = conv_out(h, dk, st.stride, dk / 2);
    w = conv_out(w, dk, st.stride, dk / 2);
    const long long p = static_cast<long long>(h) * w;
    const std::string down_name = s == 0 ? "stem" : prefix + ".down";
    walk.layer(down_name, c * c_in * dk * dk + c, c * c_in * dk * dk * p);
    walk.aux(c * p);  // downsample bias
    walk.layer(down_name + ".bn", 2 * c, 0);
    walk.aux(c * p);

    for (int b = 0; b < st.depth; ++b) {
      const std::string bp = prefix + ".block" + std::to_string(b + 1);

      walk.layer(bp + ".bn1", 2 * c, 0);
      walk.aux(c * p);
      walk.layer(bp + ".proj1", c * c + c, c * c * p);
      walk.aux(c * p);  // bias
      walk.aux(c * p);  // gelu

      long long attn_dw = 0;
      switch (config.variant) {
        case AttentionVariant::LkaTrivial:
          attn_dw = static_cast<long long>(config.spec.k) * config.spec.k;
          break;
        case AttentionVariant::LskaTrivial:
          attn_dw = 2LL * config.spec.k;
          break;
        case AttentionVariant::Lka:
          attn_dw = k_local * k_local + k_remote * k_remote;
          break;
        case AttentionVariant::Lska:
          attn_dw = 2 * k_local + 2 * k_remote;
          break;
      }
      // Depth-wise stack + channel mix; the mix carries a bias in the backbone.
      walk.layer(bp + ".attn", attn_dw * c + c * c + c, (attn_dw * c + c * c) * p);
      walk.aux(c * p);  // mix bias
      walk.aux(c * p);  // attention hadamard
      walk.layer(bp + ".proj2", c * c + c, c * c * p);
      walk.aux(c * p);  // bias
      walk.layer(bp + ".ls1", c, 0);
      walk.aux(c * p);
      walk.aux(c * p);  // residual add

      walk.layer(bp + ".bn2", 2 * c, 0);
      walk.aux(c * p);
      walk.layer(bp + ".ffn.expand", e * c * c + e * c, e * c * c * p);
      walk.aux(e * c * p);  // bias
      walk.layer(bp + ".ffn.dw", 9 * e * c + e * c, 9 * e * c * p);
      walk.aux(e * c * p);  // bias
      walk.aux(e * c * p);  // gelu
      walk.layer(bp + ".ffn.project", e * c * c + c, e * c * c * p);
      walk.aux(c * p);  // bias
      walk.layer(bp + ".ls2", c, 0);
      walk.aux(c * p);
      walk.aux(c * p);  // residual add
    }
    c_in = st.channels;
  }

  const long long c4 = config.stages[3].channels;
  walk.aux(c4 * static_cast<long long>(h) * w);  // global average pool
  walk.layer("head", c4 * config.num_classes + config.num_classes,
             c4 * static_cast<long long>(config.num_classes));
  walk.aux(config.num_classes);  // head bias
  return walk.report;
}

CostReport instrumented_module_cost(const AttentionModule& module, int height, int width,
                                    uint64_t input_seed) {
  CostReport report;
  report.n_pixels = static_cast<long long>(height) * width;
  Rng rng(input_seed);
  Tensor x = random_uniform(Dims{1, module.channels, height, width}, rng);
  const Tensor f = x;

  MacCounter counter;
  for (const ConvKernel& layer : module.layers) {
    const long long before = counter.macs;
    std::string name;
    if (layer.kind == KernelKind::Pointwise) {
      x = pointwise_conv(x, layer, &counter);
      name = "pw";
    } else {
      x = dw_conv(x, layer, &counter);
      name = "dw" + std::to_string(layer.kh) + "x" + std::to_string(layer.kw);
      if (layer.dilation > 1) name += "d" + std::to_string(layer.dilation);
    }
    report.breakdown.push_back({name, layer.param_count(), counter.macs - before});
  }
  counter.aux_ops += x.size();
  hadamard(x, f);

  report.params = module.param_count();
  report.macs = counter.macs;
  report.aux_ops = counter.aux_ops;
  return report;
}

CostReport instrumented_model_cost(const VanModel& model, int height, int width,
                                   uint64_t input_seed) {
  CostReport report;
  report.n_pixels = static_cast<long long>(height) * width;
  Rng rng(input_seed);
  const Tensor images = random_uniform(Dims{1, 3, height, width}, rng);

  MacCounter counter;
  model.forward(images, &counter);
  report.params = model.count_params();
  report.macs = counter.macs;
  report.aux_ops = counter.aux_ops;
  return report;
}

}  // namespace lska
