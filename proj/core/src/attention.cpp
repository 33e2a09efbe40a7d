#include "lska/attention.hpp"

#include <utility>

#include "lska/rng.hpp"

namespace lska {

std::string_view to_string(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::LkaTrivial: return "lka-trivial";
    case AttentionVariant::LskaTrivial: return "lska-trivial";
    case AttentionVariant::Lka: return "lka";
    case AttentionVariant::Lska: return "lska";
  }
  return "?";
}

std::optional<AttentionVariant> variant_from_string(std::string_view name) {
  for (AttentionVariant v : kAllVariants) {
    if (name == to_string(v)) return v;
  }
  return std::nullopt;
}

std::optional<int> dilation_for_kernel(int k) {
  switch (k) {
    case 7: return 2;
    case 11: return 2;
    case 23: return 3;
    case 35: return 3;
    case 53: return 3;
    case 65: return 3;
    default: return std::nullopt;
  }
}

namespace {

void require_odd(int extent, const char* what) {
  if (extent < 1 || extent % 2 == 0) {
    throw ConfigError(std::string("attention spec: ") + what + " extent " +
                      std::to_string(extent) + " must be odd and positive");
  }
}

}  // namespace

void validate_attention_spec(AttentionVariant variant, const KernelSpec& spec) {
  require_odd(spec.k, "kernel");
  if (variant == AttentionVariant::Lka || variant == AttentionVariant::Lska) {
    if (spec.d < 1) throw ConfigError("attention spec: dilation must be >= 1");
    require_odd(2 * spec.d - 1, "local (2d-1)");
    require_odd(spec.k / spec.d, "dilated floor(k/d)");
  }
}

std::vector<std::pair<int, int>> attention_axis_chain(AttentionVariant variant,
                                                      const KernelSpec& spec) {
  validate_attention_spec(variant, spec);
  const int local = 2 * spec.d - 1;
  const int remote = spec.k / spec.d;
  switch (variant) {
    case AttentionVariant::LkaTrivial:
      return {{spec.k, 1}};
    case AttentionVariant::LskaTrivial:
      return {{spec.k, 1}, {1, 1}};
    case AttentionVariant::Lka:
      return {{local, 1}, {remote, spec.d}};
    case AttentionVariant::Lska:
      return {{local, 1}, {1, 1}, {remote, spec.d}, {1, spec.d}};
  }
  return {};
}

AttentionModule build_attention(AttentionVariant variant, const KernelSpec& spec, int channels,
                                uint64_t seed) {
  validate_attention_spec(variant, spec);
  if (channels <= 0) throw ConfigError("attention: channel count must be positive");

  AttentionModule m;
  m.variant = variant;
  m.spec = spec;
  m.channels = channels;

  const int c = channels;
  const int k = spec.k;
  const int local = 2 * spec.d - 1;
  const int remote = spec.k / spec.d;
  // Horizontal (1 x k) before vertical (k x 1) in the decomposed variants.
  switch (variant) {
    case AttentionVariant::LkaTrivial:
      m.layers.push_back(ConvKernel::depthwise(c, k, k));
      break;
    case AttentionVariant::LskaTrivial:
      m.layers.push_back(ConvKernel::depthwise(c, 1, k));
      m.layers.push_back(ConvKernel::depthwise(c, k, 1));
      break;
    case AttentionVariant::Lka:
      m.layers.push_back(ConvKernel::depthwise(c, local, local));
      m.layers.push_back(ConvKernel::depthwise(c, remote, remote, spec.d));
      break;
    case AttentionVariant::Lska:
      m.layers.push_back(ConvKernel::depthwise(c, 1, local));
      m.layers.push_back(ConvKernel::depthwise(c, local, 1));
      m.layers.push_back(ConvKernel::depthwise(c, 1, remote, spec.d));
      m.layers.push_back(ConvKernel::depthwise(c, remote, 1, spec.d));
      break;
  }
  m.layers.push_back(ConvKernel::pointwise(c, c, /*with_bias=*/false));

  Rng rng(seed);
  for (ConvKernel& layer : m.layers) layer.init_uniform(rng);
  return m;
}

Tensor AttentionModule::attention_map(const Tensor& f, MacCounter* macs) const {
  Tensor a = f;
  for (const ConvKernel& layer : layers) {
    a = layer.kind == KernelKind::Pointwise ? pointwise_conv(a, layer, macs)
                                            : dw_conv(a, layer, macs);
  }
  return a;
}

Tensor AttentionModule::forward(const Tensor& f, MacCounter* macs) const {
  Tensor a = attention_map(f, macs);
  if (macs) macs->aux_ops += f.size();
  return hadamard(a, f);
}

ValueId AttentionModule::forward(Tape& tape, ValueId f) const {
  ValueId a = f;
  for (const ConvKernel& layer : layers) {
    a = layer.kind == KernelKind::Pointwise ? tape.pointwise_conv(a, layer)
                                            : tape.dw_conv(a, layer);
  }
  return tape.hadamard(a, f);
}

long long AttentionModule::param_count() const {
  long long total = 0;
  for (const ConvKernel& layer : layers) total += layer.param_count();
  return total;
}

void AttentionModule::fill_weights(double value) {
  for (ConvKernel& layer : layers) {
    for (double& w : layer.weights) w = value;
  }
}

double rank1_equivalence_check(const KernelSpec& spec, int channels, int trials, uint64_t seed) {
  AttentionModule lka = build_attention(AttentionVariant::Lka, spec, channels, seed);
  AttentionModule lska = build_attention(AttentionVariant::Lska, spec, channels, seed);

  const int local = 2 * spec.d - 1;
  const int remote = spec.k / spec.d;
  const int hw = 2 * spec.k;
  Rng rng(seed);
  double worst = 0.0;

  for (int trial = 0; trial < trials; ++trial) {
    // Draw the four 1-D kernels per channel; the LKA 2-D kernels are their
    // outer products, so both modules realise the same linear map.
    for (int c = 0; c < channels; ++c) {
      std::vector<double> h1(local), v1(local), h2(remote), v2(remote);
      for (double& w : h1) w = rng.uniform(-1.0, 1.0);
      for (double& w : v1) w = rng.uniform(-1.0, 1.0);
      for (double& w : h2) w = rng.uniform(-1.0, 1.0);
      for (double& w : v2) w = rng.uniform(-1.0, 1.0);
      for (int ky = 0; ky < local; ++ky)
        for (int kx = 0; kx < local; ++kx)
          lka.layers[0].weights[(static_cast<size_t>(c) * local + ky) * local + kx] =
              v1[ky] * h1[kx];
      for (int ky = 0; ky < remote; ++ky)
        for (int kx = 0; kx < remote; ++kx)
          lka.layers[1].weights[(static_cast<size_t>(c) * remote + ky) * remote + kx] =
              v2[ky] * h2[kx];
      for (int i = 0; i < local; ++i) {
        lska.layers[0].weights[static_cast<size_t>(c) * local + i] = h1[i];
        lska.layers[1].weights[static_cast<size_t>(c) * local + i] = v1[i];
      }
      for (int i = 0; i < remote; ++i) {
        lska.layers[2].weights[static_cast<size_t>(c) * remote + i] = h2[i];
        lska.layers[3].weights[static_cast<size_t>(c) * remote + i] = v2[i];
      }
    }
    for (size_t i = 0; i < lka.layers.back().weights.size(); ++i) {
      const double w = rng.uniform(-1.0, 1.0);
      lka.layers.back().weights[i] = w;
      lska.layers.back().weights[i] = w;
    }

    const Tensor f = random_uniform(Dims{1, channels, hw, hw}, rng);
    worst = std::max(worst, max_abs_diff(lka.forward(f), lska.forward(f)));
  }
  return worst;
}

}  // namespace lska
