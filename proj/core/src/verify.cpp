#include "lska/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lska/analysis.hpp"
#include "lska/attention.hpp"
#include "lska/backbone.hpp"
#include "lska/cost.hpp"
#include "lska/io.hpp"
#include "lska/rng.hpp"

namespace lska {

namespace {

double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

// Scalar projection of the root value so finite differences probe one number.
double project(const Tensor& t, const Tensor& weights) {
  double acc = 0.0;
  for (long long i = 0; i < t.size(); ++i) acc += t[i] * weights[i];
  return acc;
}

struct GradCheck {
  double worst_rel = 0.0;
  int coords = 0;
};

// Central finite differences against the tape gradient of `loss(x)` where
// loss = <forward(x), proj>. Checks the `count` largest-magnitude gradient
// entries; tiny entries are skipped because FD noise would dominate them.
GradCheck check_input_gradient(const std::function<Tensor(const Tensor&)>& forward,
                               const Tensor& x0, const Tensor& proj, const Tensor& analytic,
                               int count, bool corrupt) {
  std::vector<long long> order(static_cast<size_t>(analytic.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](long long a, long long b) { return std::abs(analytic[a]) > std::abs(analytic[b]); });

  GradCheck out;
  const double h = 1e-5;
  Tensor x = x0;
  for (int i = 0; i < count && i < static_cast<int>(order.size()); ++i) {
    const long long idx = order[static_cast<size_t>(i)];
    if (std::abs(analytic[idx]) < 1e-6) break;  // remaining entries are tinier still
    const double saved = x[idx];
    x[idx] = saved + h;
    const double up = project(forward(x), proj);
    x[idx] = saved - h;
    const double down = project(forward(x), proj);
    x[idx] = saved;
    const double fd = (up - down) / (2.0 * h);
    double a = analytic[idx];
    if (corrupt && i == 0) a *= 1.001;  // negative control: must trip the tolerance
    out.worst_rel = std::max(out.worst_rel, rel_err(a, fd));
    ++out.coords;
  }
  return out;
}

PropertyResult check_rank1(const VerifyOptions&) {
  PropertyResult r{"rank1-equivalence", true, ""};
  double worst = 0.0;
  int worst_k = 0;
  for (int k : kSweepKernels) {
    const KernelSpec spec{k, *dilation_for_kernel(k)};
    const double diff = rank1_equivalence_check(spec, /*channels=*/2, /*trials=*/3,
                                                /*seed=*/2024 + static_cast<uint64_t>(k));
    if (diff > worst) {
      worst = diff;
      worst_k = k;
    }
  }
  r.pass = worst < 1e-12;
  r.detail = "max |lka - lska| = " + format_double(worst) + " (worst at k=" +
             std::to_string(worst_k) + ", bound 1e-12)";
  return r;
}

PropertyResult check_gradients(const VerifyOptions& options) {
  PropertyResult r{"gradient-finite-difference", true, ""};
  double worst = 0.0;
  int coords = 0;

  // Attention modules exercise the depth-wise (plain and dilated), pointwise
  // and hadamard VJPs on every variant.
  for (AttentionVariant variant : kAllVariants) {
    const KernelSpec spec{7, 2};
    const AttentionModule mod = build_attention(variant, spec, /*channels=*/3, /*seed=*/11);
    Rng rng(17);
    const Tensor x0 = random_uniform(Dims{1, 3, 12, 12}, rng);
    const Tensor proj = random_uniform(x0.dims(), rng);

    Tape tape;
    const ValueId in = tape.leaf(x0);
    const ValueId out = mod.forward(tape, in);
    tape.backward(out, proj, /*with_param_grads=*/false);
    const auto check = check_input_gradient(
        [&mod](const Tensor& x) { return mod.forward(x); }, x0, proj, tape.grad(in),
        /*count=*/6, options.corrupt_vjp);
    worst = std::max(worst, check.worst_rel);
    coords += check.coords;
  }

  // A miniature backbone covers the dense, norm, activation, scale, residual,
  // pooling and linear VJPs in one composite function.
  {
    ModelConfig cfg = ModelConfig::make(Capacity::Tiny, AttentionVariant::Lska, KernelSpec{7, 2},
                                        /*num_classes=*/5, /*seed=*/3);
    for (auto& st : cfg.stages) st.depth = 0;
    cfg.stages[0].depth = 1;  // one full block behind the stem
    VanModel model = build_van(cfg);

    Rng rng(23);
    const Tensor x0 = random_uniform(Dims{1, 3, 16, 16}, rng);
    const Tensor proj = random_uniform(Dims{1, 5, 1, 1}, rng);

    Tape tape;
    const ValueId in = tape.leaf(x0);
    const ValueId out = model.forward(tape, in);
    tape.backward(out, proj, /*with_param_grads=*/false);
    const auto check = check_input_gradient(
        [&model](const Tensor& x) { return model.forward(x); }, x0, proj, tape.grad(in),
        /*count=*/8, options.corrupt_vjp);
    worst = std::max(worst, check.worst_rel);
    coords += check.coords;
  }

  r.pass = worst <= 1e-6 && coords > 0;
  r.detail = "worst rel err " + format_double(worst) + " over " + std::to_string(coords) +
             " coordinates (bound 1e-6)";
  if (options.corrupt_vjp) r.detail += " [negative control: one gradient deliberately corrupted]";
  return r;
}

PropertyResult check_impulse(const VerifyOptions&) {
  PropertyResult r{"impulse-receptive-field", true, ""};
  std::string bad;
  for (AttentionVariant variant : kAllVariants) {
    for (int k : kSweepKernels) {
      const KernelSpec spec{k, *dilation_for_kernel(k)};
      AttentionModule mod = build_attention(variant, spec, /*channels=*/2, /*seed=*/5);
      mod.fill_weights(1.0);  // all-positive taps: no cancellation inside the box
      const Dims dims{1, 2, k + 9, k + 9};
      const SupportExtent support = impulse_support(
          [&mod](const Tensor& x) { return mod.attention_map(x); }, dims);
      const int analytic =
          receptive_field_analytic(attention_axis_chain(variant, spec));
      if (!support.conclusive || support.height != k || support.width != k || analytic != k) {
        bad += " " + std::string(to_string(variant)) + "/k=" + std::to_string(k) + " got " +
               std::to_string(support.height) + "x" + std::to_string(support.width) +
               " analytic " + std::to_string(analytic);
      }
    }
  }
  r.pass = bad.empty();
  r.detail = bad.empty() ? "support == analytic == k for all variants and kernels"
                         : ("mismatch:" + bad);
  return r;
}

PropertyResult check_cost(const VerifyOptions&) {
  PropertyResult r{"cost-analytic-vs-instrumented", true, ""};
  std::string bad;
  for (AttentionVariant variant : kAllVariants) {
    const KernelSpec spec{23, 3};
    const AttentionModule mod = build_attention(variant, spec, /*channels=*/8, /*seed=*/7);
    const CostReport inst = instrumented_module_cost(mod, 14, 14);
    const long long params = attention_params_analytic(variant, spec, 8);
    const long long flops = attention_flops_analytic(variant, spec, 8, 14, 14);
    if (inst.params != params || inst.macs != flops) {
      bad += " module/" + std::string(to_string(variant));
    }

    const ModelConfig cfg = ModelConfig::make(Capacity::Tiny, variant, spec);
    const CostReport analytic = model_cost(cfg, 64, 64);
    const CostReport measured = instrumented_model_cost(build_van(cfg), 64, 64);
    if (analytic.params != measured.params || analytic.macs != measured.macs ||
        analytic.aux_ops != measured.aux_ops) {
      bad += " model/" + std::string(to_string(variant));
    }
  }
  r.pass = bad.empty();
  r.detail = bad.empty() ? "exact parameter/MAC/aux agreement at 14x14 modules and 64x64 models"
                         : ("disagreement:" + bad);
  return r;
}

PropertyResult check_probe(const VerifyOptions&) {
  PropertyResult r{"probe-identities", true, ""};
  std::string bad;

  const std::vector<double> a{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> affine{3.0, 5.0, 7.0, 9.0};
  const std::vector<double> anti{4.0, 3.0, 2.0, 1.0};
  const std::vector<double> b{2.0, 4.0, 5.0, 9.0};
  if (rel_err(pearson_correlation(a, affine), 1.0) > 1e-12) bad += " affine!=+1";
  if (rel_err(pearson_correlation(a, anti), -1.0) > 1e-12) bad += " reversed!=-1";
  // Hand-computed: cov=11, var_a=5, var_b=26 -> 11/sqrt(130).
  if (rel_err(pearson_correlation(a, b), 11.0 / std::sqrt(130.0)) > 1e-12) bad += " known-value";
  bool zero_var = false;
  const std::vector<double> flat{2.0, 2.0, 2.0, 2.0};
  if (pearson_correlation(a, flat, &zero_var) != 0.0 || !zero_var) bad += " zero-variance";

  if (mutual_information(0.0) != 0.0) bad += " mi(0)!=0";
  if (rel_err(mutual_information(0.5), mutual_information(-0.5)) > 1e-12) bad += " mi-asym";
  if (!std::isfinite(mutual_information(kCorrelationClamp))) bad += " mi-clamp-inf";

  const std::array<double, 3> dims = dimensionality({1.0, 0.0, 0.0}, 256);
  const double total = dims[0] + dims[1] + dims[2];
  if (std::abs(total - 256.0) > 1e-9) bad += " softmax-sum";
  // e/(e+2)*256, an exact consequence of softmax(1,0,0).
  if (rel_err(dims[0], std::exp(1.0) / (std::exp(1.0) + 2.0) * 256.0) > 1e-12) {
    bad += " softmax-value";
  }

  r.pass = bad.empty();
  r.detail = bad.empty() ? "correlation, MI and dimensionality identities hold" : ("failed:" + bad);
  return r;
}

PropertyResult check_mrf(const VerifyOptions&) {
  PropertyResult r{"mrf-arithmetic", true, ""};
  std::string bad;
  for (int k : kSweepKernels) {
    const int d = *dilation_for_kernel(k);
    for (AttentionVariant variant : kAllVariants) {
      const int rf = receptive_field_analytic(attention_axis_chain(variant, KernelSpec{k, d}));
      if (rf != k) {
        bad += " " + std::string(to_string(variant)) + "/k=" + std::to_string(k) + " rf=" +
               std::to_string(rf);
      }
    }
    const auto [local_ratio, remote_ratio] = savings_ratio(k, d);
    if (rel_err(local_ratio, (2.0 * d - 1.0) / 2.0) > 1e-12 ||
        rel_err(remote_ratio, (k / d) / 2.0) > 1e-12) {
      bad += " savings/k=" + std::to_string(k);
    }
  }
  r.pass = bad.empty();
  r.detail = bad.empty() ? "chain receptive field equals k for every variant and kernel"
                         : ("mismatch:" + bad);
  return r;
}

}  // namespace

std::vector<PropertyResult> run_verification(const VerifyOptions& options) {
  using Check = PropertyResult (*)(const VerifyOptions&);
  const std::pair<const char*, Check> checks[] = {
      {"rank1-equivalence", &check_rank1},
      {"gradient-finite-difference", &check_gradients},
      {"impulse-receptive-field", &check_impulse},
      {"cost-analytic-vs-instrumented", &check_cost},
      {"probe-identities", &check_probe},
      {"mrf-arithmetic", &check_mrf},
  };
  std::vector<PropertyResult> results;
  for (const auto& [name, fn] : checks) {
    if (!options.filter.empty() && std::string(name).find(options.filter) == std::string::npos) {
      continue;
    }
    results.push_back(fn(options));
  }
  return results;
}

}  // namespace lska
