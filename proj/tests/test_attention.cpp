#include <gtest/gtest.h>

#include "lska/attention.hpp"
#include "lska/cost.hpp"
#include "lska/rng.hpp"

using namespace lska;

TEST(Variant, StringRoundTrip) {
  for (AttentionVariant v : kAllVariants) {
    const auto parsed = variant_from_string(to_string(v));
    ASSERT_TRUE(parsed.has_value());
    EXPECT_EQ(*parsed, v);
  }
  EXPECT_FALSE(variant_from_string("lkx").has_value());
}

TEST(Variant, DilationTable) {
  EXPECT_EQ(dilation_for_kernel(7), 2);
  EXPECT_EQ(dilation_for_kernel(11), 2);
  EXPECT_EQ(dilation_for_kernel(23), 3);
  EXPECT_EQ(dilation_for_kernel(35), 3);
  EXPECT_EQ(dilation_for_kernel(53), 3);
  EXPECT_EQ(dilation_for_kernel(65), 3);
  EXPECT_FALSE(dilation_for_kernel(9).has_value());
}

TEST(KernelSpecChecks, DerivedExtentsStayOddForBuiltinPairs) {
  for (int k : kSweepKernels) {
    const KernelSpec spec{k, *dilation_for_kernel(k)};
    for (AttentionVariant v : kAllVariants) {
      EXPECT_NO_THROW(validate_attention_spec(v, spec)) << to_string(v) << " k=" << k;
    }
  }
}

TEST(KernelSpecChecks, RejectsEvenDerivedExtent) {
  // floor(9/2) = 4 is even: invalid for the decomposed variants.
  EXPECT_THROW(validate_attention_spec(AttentionVariant::Lka, KernelSpec{9, 2}), ConfigError);
  try {
    validate_attention_spec(AttentionVariant::Lska, KernelSpec{9, 2});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("4"), std::string::npos) << e.what();
  }
  // ...but fine for the trivial ones, which ignore d.
  EXPECT_NO_THROW(validate_attention_spec(AttentionVariant::LkaTrivial, KernelSpec{9, 2}));
  EXPECT_THROW(validate_attention_spec(AttentionVariant::LkaTrivial, KernelSpec{8, 1}),
               ConfigError);
}

TEST(AxisChain, ReceptiveFieldEqualsK) {
  for (int k : kSweepKernels) {
    const KernelSpec spec{k, *dilation_for_kernel(k)};
    for (AttentionVariant v : kAllVariants) {
      EXPECT_EQ(receptive_field_analytic(attention_axis_chain(v, spec)), k)
          << to_string(v) << " k=" << k;
    }
  }
}

TEST(Build, LayerGeometryPerVariant) {
  const KernelSpec spec{23, 3};  // local 5, remote 7
  const int c = 4;

  const AttentionModule lka_t = build_attention(AttentionVariant::LkaTrivial, spec, c, 0);
  ASSERT_EQ(lka_t.layers.size(), 2u);
  EXPECT_EQ(lka_t.layers[0].kh, 23);
  EXPECT_EQ(lka_t.layers[0].kw, 23);
  EXPECT_EQ(lka_t.layers[1].kind, KernelKind::Pointwise);

  const AttentionModule lska_t = build_attention(AttentionVariant::LskaTrivial, spec, c, 0);
  ASSERT_EQ(lska_t.layers.size(), 3u);
  EXPECT_EQ(lska_t.layers[0].kind, KernelKind::DepthwiseHorizontal);  // 1x23 first
  EXPECT_EQ(lska_t.layers[0].kw, 23);
  EXPECT_EQ(lska_t.layers[1].kind, KernelKind::DepthwiseVertical);
  EXPECT_EQ(lska_t.layers[1].kh, 23);

  const AttentionModule lka = build_attention(AttentionVariant::Lka, spec, c, 0);
  ASSERT_EQ(lka.layers.size(), 3u);
  EXPECT_EQ(lka.layers[0].kh, 5);
  EXPECT_EQ(lka.layers[0].dilation, 1);
  EXPECT_EQ(lka.layers[1].kh, 7);
  EXPECT_EQ(lka.layers[1].dilation, 3);

  const AttentionModule lska = build_attention(AttentionVariant::Lska, spec, c, 0);
  ASSERT_EQ(lska.layers.size(), 5u);
  EXPECT_EQ(lska.layers[0].kind, KernelKind::DepthwiseHorizontal);
  EXPECT_EQ(lska.layers[0].kw, 5);
  EXPECT_EQ(lska.layers[1].kind, KernelKind::DepthwiseVertical);
  EXPECT_EQ(lska.layers[1].kh, 5);
  EXPECT_EQ(lska.layers[2].kind, KernelKind::DepthwiseHorizontal);
  EXPECT_EQ(lska.layers[2].kw, 7);
  EXPECT_EQ(lska.layers[2].dilation, 3);
  EXPECT_EQ(lska.layers[3].kind, KernelKind::DepthwiseVertical);
  EXPECT_EQ(lska.layers[3].kh, 7);
  EXPECT_EQ(lska.layers[3].dilation, 3);

  // Standalone modules carry no biases anywhere.
  for (const AttentionModule* m : {&lka_t, &lska_t, &lka, &lska}) {
    for (const ConvKernel& layer : m->layers) EXPECT_TRUE(layer.bias.empty());
  }
}

TEST(Build, ParamCountMatchesClosedForm) {
  for (int k : kSweepKernels) {
    const KernelSpec spec{k, *dilation_for_kernel(k)};
    for (AttentionVariant v : kAllVariants) {
      for (int c : {8, 32}) {
        const AttentionModule m = build_attention(v, spec, c, 1);
        EXPECT_EQ(m.param_count(), attention_params_analytic(v, spec, c))
            << to_string(v) << " k=" << k << " c=" << c;
      }
    }
  }
}

TEST(Build, DeterministicForSeed) {
  const AttentionModule a = build_attention(AttentionVariant::Lska, {23, 3}, 8, 99);
  const AttentionModule b = build_attention(AttentionVariant::Lska, {23, 3}, 8, 99);
  const AttentionModule c = build_attention(AttentionVariant::Lska, {23, 3}, 8, 100);
  ASSERT_EQ(a.layers.size(), b.layers.size());
  bool all_equal_ab = true, all_equal_ac = true;
  for (size_t i = 0; i < a.layers.size(); ++i) {
    all_equal_ab = all_equal_ab && a.layers[i].weights == b.layers[i].weights;
    all_equal_ac = all_equal_ac && a.layers[i].weights == c.layers[i].weights;
  }
  EXPECT_TRUE(all_equal_ab);
  EXPECT_FALSE(all_equal_ac);
}

TEST(Forward, OutputIsMapTimesInput) {
  Rng rng(21);
  const AttentionModule m = build_attention(AttentionVariant::Lka, {7, 2}, 3, 5);
  const Tensor f = random_uniform(Dims{2, 3, 9, 9}, rng);
  const Tensor map = m.attention_map(f);
  const Tensor out = m.forward(f);
  EXPECT_LE(max_abs_diff(out, hadamard(map, f)), 0.0);
}

TEST(Forward, TapeMatchesEager) {
  Rng rng(22);
  for (AttentionVariant v : kAllVariants) {
    const AttentionModule m = build_attention(v, {7, 2}, 3, 6);
    const Tensor f = random_uniform(Dims{1, 3, 8, 8}, rng);
    Tape tape;
    const ValueId out = m.forward(tape, tape.leaf(f));
    EXPECT_LE(max_abs_diff(tape.value(out), m.forward(f)), 0.0) << to_string(v);
  }
}

TEST(Forward, MacCountsAddUp) {
  const AttentionModule m = build_attention(AttentionVariant::Lska, {23, 3}, 8, 7);
  Rng rng(23);
  const Tensor f = random_uniform(Dims{1, 8, 14, 14}, rng);
  MacCounter macs;
  m.forward(f, &macs);
  // (2*5 + 2*7) dw taps per channel + 8x8 mix, times 14*14 pixels.
  EXPECT_EQ(macs.macs, attention_flops_analytic(AttentionVariant::Lska, {23, 3}, 8, 14, 14));
  EXPECT_EQ(macs.aux_ops, 8LL * 14 * 14);  // hadamard only: no biases standalone
}

TEST(Rank1, SeparableEqualsOuterProduct) {
  const double diff = rank1_equivalence_check({23, 3}, 4, 5, 123);
  EXPECT_LT(diff, 1e-12);
}

TEST(FillWeights, SetsEveryTap) {
  AttentionModule m = build_attention(AttentionVariant::LskaTrivial, {11, 2}, 2, 3);
  m.fill_weights(0.25);
  for (const ConvKernel& layer : m.layers) {
    for (double w : layer.weights) EXPECT_DOUBLE_EQ(w, 0.25);
  }
}
