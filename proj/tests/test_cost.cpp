#include <gtest/gtest.h>

#include <cmath>

#include "lska/cost.hpp"

using namespace lska;

TEST(ModuleParams, ClosedFormsAtC32) {
  const KernelSpec k23{23, 3};
  // k^2 C + C^2 / 2kC + C^2 / ((2d-1)^2 + floor(k/d)^2)C + C^2 / (2(2d-1) + 2 floor(k/d))C + C^2
  EXPECT_EQ(attention_params_analytic(AttentionVariant::LkaTrivial, k23, 32),
            529 * 32 + 1024);
  EXPECT_EQ(attention_params_analytic(AttentionVariant::LskaTrivial, k23, 32),
            46 * 32 + 1024);
  EXPECT_EQ(attention_params_analytic(AttentionVariant::Lka, k23, 32), (25 + 49) * 32 + 1024);
  EXPECT_EQ(attention_params_analytic(AttentionVariant::Lska, k23, 32), (10 + 14) * 32 + 1024);
  EXPECT_EQ(attention_params_analytic(AttentionVariant::Lska, k23, 32), 1792);
}

TEST(ModuleFlops, ScaleWithPixels) {
  EXPECT_EQ(attention_flops_analytic(AttentionVariant::Lska, {23, 3}, 32, 7, 7), 87808);
  EXPECT_EQ(attention_flops_analytic(AttentionVariant::Lska, {23, 3}, 32, 14, 14), 87808 * 4);
}

TEST(SavingsRatio, PerLayerFactors) {
  const auto [local, remote] = savings_ratio(35, 3);
  EXPECT_DOUBLE_EQ(local, 2.5);   // (2*3-1)/2
  EXPECT_DOUBLE_EQ(remote, 5.5);  // floor(35/3)/2
}

TEST(GrowthOrder, QuadraticAndAffineInK) {
  // Built modules, not formulas: the counts must grow exactly
  // quadratically (LKA-trivial) / affinely (LSKA-trivial) in k.
  const int c = 32;
  auto module_params = [&](AttentionVariant v, int k) {
    return build_attention(v, KernelSpec{k, *dilation_for_kernel(k)}, c, 0).param_count();
  };
  // Evenly spaced sub-grid {11, 23, 35}, h = 12: constant second difference
  // of k^2*C + C^2 is 2*C*h^2.
  const long long q11 = module_params(AttentionVariant::LkaTrivial, 11);
  const long long q23 = module_params(AttentionVariant::LkaTrivial, 23);
  const long long q35 = module_params(AttentionVariant::LkaTrivial, 35);
  EXPECT_EQ(q35 - 2 * q23 + q11, 2LL * c * 12 * 12);

  // Affine: every slope between consecutive supported kernels is exactly 2C.
  const int ks[] = {7, 11, 23, 35, 53, 65};
  for (size_t i = 1; i < std::size(ks); ++i) {
    const long long lo = module_params(AttentionVariant::LskaTrivial, ks[i - 1]);
    const long long hi = module_params(AttentionVariant::LskaTrivial, ks[i]);
    EXPECT_EQ(hi - lo, 2LL * c * (ks[i] - ks[i - 1])) << "k=" << ks[i];
  }
}

TEST(ModelCost, TinyTotalsMatchHandDerivation) {
  const CostReport lka = model_cost(ModelConfig::make(Capacity::Tiny, AttentionVariant::Lka, {23, 3}), 224, 224);
  EXPECT_EQ(lka.params, 4101576);
  const CostReport lska =
      model_cost(ModelConfig::make(Capacity::Tiny, AttentionVariant::Lska, {23, 3}), 224, 224);
  EXPECT_EQ(lska.params, 4021576);
}

TEST(ModelCost, ReferenceTotalsTinyAt224) {
  struct Case {
    AttentionVariant variant;
    int k;
    double params_m;
    double gflops;
  };
  // Appendix table, VAN-Tiny rows.
  const Case cases[] = {
      {AttentionVariant::LkaTrivial, 23, 4.83, 1.16},
      {AttentionVariant::LskaTrivial, 23, 4.06, 0.85},
      {AttentionVariant::Lka, 23, 4.11, 0.87},
      {AttentionVariant::Lska, 23, 4.03, 0.84},
      {AttentionVariant::LkaTrivial, 65, 10.74, 3.49},
      {AttentionVariant::LskaTrivial, 65, 4.19, 0.90},
      {AttentionVariant::Lka, 65, 4.73, 1.12},
      {AttentionVariant::Lska, 65, 4.07, 0.85},
  };
  for (const Case& c : cases) {
    const KernelSpec spec{c.k, *dilation_for_kernel(c.k)};
    const CostReport r = model_cost(ModelConfig::make(Capacity::Tiny, c.variant, spec), 224, 224);
    EXPECT_NEAR(r.params / 1e6, c.params_m, c.params_m * 0.02)
        << to_string(c.variant) << " k=" << c.k;
    EXPECT_NEAR(r.gflops(), c.gflops, c.gflops * 0.05) << to_string(c.variant) << " k=" << c.k;
  }
}

TEST(ModelCost, BreakdownSumsToTotals) {
  const CostReport r =
      model_cost(ModelConfig::make(Capacity::Tiny, AttentionVariant::Lska, {35, 3}), 224, 224);
  long long params = 0, macs = 0;
  for (const LayerCost& l : r.breakdown) {
    params += l.params;
    macs += l.macs;
  }
  EXPECT_EQ(params, r.params);
  EXPECT_EQ(macs, r.macs);
  EXPECT_FALSE(r.breakdown.empty());
  EXPECT_EQ(r.breakdown.front().layer, "stem");
  EXPECT_EQ(r.breakdown.back().layer, "head");
}

TEST(Instrumented, ModuleAgreesWithAnalytic) {
  for (AttentionVariant v : kAllVariants) {
    for (int k : {7, 23}) {
      const KernelSpec spec{k, *dilation_for_kernel(k)};
      const AttentionModule m = build_attention(v, spec, 8, 3);
      const CostReport inst = instrumented_module_cost(m, 14, 14);
      EXPECT_EQ(inst.params, attention_params_analytic(v, spec, 8)) << to_string(v);
      EXPECT_EQ(inst.macs, attention_flops_analytic(v, spec, 8, 14, 14)) << to_string(v);
    }
  }
}

TEST(Instrumented, ModelAgreesWithAnalyticWalk) {
  const ModelConfig cfg = ModelConfig::make(Capacity::Tiny, AttentionVariant::Lka, {23, 3});
  const CostReport analytic = model_cost(cfg, 32, 32);
  const CostReport inst = instrumented_model_cost(build_van(cfg), 32, 32);
  EXPECT_EQ(analytic.params, inst.params);
  EXPECT_EQ(analytic.macs, inst.macs);
  EXPECT_EQ(analytic.aux_ops, inst.aux_ops);
}

TEST(Instrumented, ModuleBreakdownNamesLayers) {
  const AttentionModule m = build_attention(AttentionVariant::Lska, {23, 3}, 4, 1);
  const CostReport r = instrumented_module_cost(m, 7, 7);
  ASSERT_EQ(r.breakdown.size(), 5u);
  EXPECT_EQ(r.breakdown[0].layer, "dw1x5");
  EXPECT_EQ(r.breakdown[1].layer, "dw5x1");
  EXPECT_EQ(r.breakdown[2].layer, "dw1x7d3");
  EXPECT_EQ(r.breakdown[3].layer, "dw7x1d3");
  EXPECT_EQ(r.breakdown[4].layer, "pw");
}

TEST(ModelCost, OrderingAtK65) {
  // LSKA < LSKA-trivial < LKA < LKA-trivial in parameters at k=65.
  auto params = [](AttentionVariant v) {
    return model_cost(ModelConfig::make(Capacity::Tiny, v, {65, 3}), 224, 224).params;
  };
  const long long lska = params(AttentionVariant::Lska);
  const long long lska_t = params(AttentionVariant::LskaTrivial);
  const long long lka = params(AttentionVariant::Lka);
  const long long lka_t = params(AttentionVariant::LkaTrivial);
  EXPECT_LT(lska, lska_t);
  EXPECT_LT(lska_t, lka);
  EXPECT_LT(lka, lka_t);
}
