#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "lska/autograd.hpp"
#include "lska/rng.hpp"

using namespace lska;

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kTol = 1e-6;

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// Scalar loss <f(x), proj> so every gradient entry is probed by one number.
double loss_of(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
               const Tensor& proj) {
  const Tensor y = f(x);
  double acc = 0.0;
  for (long long i = 0; i < y.size(); ++i) acc += y[i] * proj[i];
  return acc;
}

// Central finite difference d(loss)/dx[i].
double fd_at(const std::function<Tensor(const Tensor&)>& f, Tensor x, const Tensor& proj,
             long long i) {
  const double saved = x[i];
  x[i] = saved + kFdStep;
  const double up = loss_of(f, x, proj);
  x[i] = saved - kFdStep;
  const double down = loss_of(f, x, proj);
  return (up - down) / (2.0 * kFdStep);
}

// Checks the tape's input gradient against finite differences on every
// coordinate whose analytic magnitude clears the FD noise floor.
void check_input_grad(const std::function<ValueId(Tape&, ValueId)>& record,
                      const std::function<Tensor(const Tensor&)>& eager, const Tensor& x,
                      const Tensor& proj) {
  Tape tape;
  const ValueId in = tape.leaf(x);
  const ValueId out = record(tape, in);
  tape.backward(out, proj);
  const Tensor& g = tape.grad(in);
  int checked = 0;
  for (long long i = 0; i < g.size(); ++i) {
    if (std::abs(g[i]) < 1e-4) continue;
    EXPECT_LE(rel_err(g[i], fd_at(eager, x, proj, i)), kTol) << "coordinate " << i;
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

}  // namespace

TEST(Tape, LeafValueRoundTrip) {
  Tape tape;
  Rng rng(1);
  const Tensor x = random_uniform(Dims{1, 2, 3, 3}, rng);
  const ValueId id = tape.leaf(x);
  EXPECT_EQ(tape.num_values(), 1);
  EXPECT_LE(max_abs_diff(tape.value(id), x), 0.0);
  EXPECT_FALSE(tape.has_grad(id));
  EXPECT_THROW(tape.grad(id), ShapeError);
}

TEST(Tape, ForwardMatchesEagerOps) {
  Rng rng(2);
  const Tensor x = random_uniform(Dims{2, 3, 5, 5}, rng);
  ConvKernel dw = ConvKernel::depthwise(3, 3, 3, 1, true);
  dw.init_uniform(rng);
  for (double& b : dw.bias) b = rng.uniform(-1, 1);

  Tape tape;
  const ValueId in = tape.leaf(x);
  const ValueId out = tape.dw_conv(in, dw);
  EXPECT_LE(max_abs_diff(tape.value(out), dw_conv(x, dw)), 0.0);
}

TEST(TapeGrad, DwConvPlain) {
  Rng rng(3);
  ConvKernel k = ConvKernel::depthwise(2, 3, 3);
  k.init_uniform(rng);
  const Tensor x = random_uniform(Dims{1, 2, 6, 6}, rng);
  const Tensor proj = random_uniform(x.dims(), rng);
  check_input_grad([&](Tape& t, ValueId v) { return t.dw_conv(v, k); },
                   [&](const Tensor& v) { return dw_conv(v, k); }, x, proj);
}

TEST(TapeGrad, DwConvDilatedRect) {
  Rng rng(4);
  ConvKernel k = ConvKernel::depthwise(2, 1, 5, 2);
  k.init_uniform(rng);
  const Tensor x = random_uniform(Dims{1, 2, 4, 12}, rng);
  const Tensor proj = random_uniform(x.dims(), rng);
  check_input_grad([&](Tape& t, ValueId v) { return t.dw_conv(v, k); },
                   [&](const Tensor& v) { return dw_conv(v, k); }, x, proj);
}

TEST(TapeGrad, DwConvWeightsAndBias) {
  Rng rng(5);
  ConvKernel k = ConvKernel::depthwise(2, 3, 3, 1, true);
  k.init_uniform(rng);
  for (double& b : k.bias) b = rng.uniform(-1, 1);
  const Tensor x = random_uniform(Dims{1, 2, 5, 5}, rng);
  const Tensor proj = random_uniform(x.dims(), rng);

  Tape tape;
  const ValueId in = tape.leaf(x);
  const ValueId out = tape.dw_conv(in, k);
  tape.backward(out, proj);
  const Tape::ParamGrads& pg = tape.param_grads(out);
  ASSERT_EQ(pg.weights.size(), k.weights.size());
  ASSERT_EQ(pg.bias.size(), k.bias.size());

  // FD over the kernel parameters themselves.
  for (size_t wi = 0; wi < k.weights.size(); ++wi) {
    const double saved = k.weights[wi];
    k.weights[wi] = saved + kFdStep;
    const double up = loss_of([&](const Tensor& v) { return dw_conv(v, k); }, x, proj);
    k.weights[wi] = saved - kFdStep;
    const double down = loss_of([&](const Tensor& v) { return dw_conv(v, k); }, x, proj);
    k.weights[wi] = saved;
    const double fd = (up - down) / (2.0 * kFdStep);
    if (std::abs(pg.weights[wi]) < 1e-4) continue;
    EXPECT_LE(rel_err(pg.weights[wi], fd), kTol);
  }
  for (size_t bi = 0; bi < k.bias.size(); ++bi) {
    const double saved = k.bias[bi];
    k.bias[bi] = saved + kFdStep;
    const double up = loss_of([&](const Tensor& v) { return dw_conv(v, k); }, x, proj);
    k.bias[bi] = saved - kFdStep;
    const double down = loss_of([&](const Tensor& v) { return dw_conv(v, k); }, x, proj);
    k.bias[bi] = saved;
    EXPECT_LE(rel_err(pg.bias[bi], (up - down) / (2.0 * kFdStep)), kTol);
  }
}

TEST(TapeGrad, PointwiseConv) {
  Rng rng(6);
  ConvKernel k = ConvKernel::pointwise(3, 4, true);
  k.init_uniform(rng);
  for (double& b : k.bias) b = rng.uniform(-1, 1);
  const Tensor x = random_uniform(Dims{2, 3, 4, 4}, rng);
  const Tensor proj = random_uniform(Dims{2, 4, 4, 4}, rng);
  check_input_grad([&](Tape& t, ValueId v) { return t.pointwise_conv(v, k); },
                   [&](const Tensor& v) { return pointwise_conv(v, k); }, x, proj);

  Tape tape;
  const ValueId in = tape.leaf(x);
  const ValueId out = tape.pointwise_conv(in, k);
  tape.backward(out, proj);
  const Tape::ParamGrads& pg = tape.param_grads(out);
  for (size_t wi = 0; wi < k.weights.size(); ++wi) {
    const double saved = k.weights[wi];
    k.weights[wi] = saved + kFdStep;
    const double up = loss_of([&](const Tensor& v) { return pointwise_conv(v, k); }, x, proj);
    k.weights[wi] = saved - kFdStep;
    const double down = loss_of([&](const Tensor& v) { return pointwise_conv(v, k); }, x, proj);
    k.weights[wi] = saved;
    if (std::abs(pg.weights[wi]) < 1e-4) continue;
    EXPECT_LE(rel_err(pg.weights[wi], (up - down) / (2.0 * kFdStep)), kTol);
  }
}

TEST(TapeGrad, DenseConvStridePad) {
  Rng rng(7);
  ConvKernel k = ConvKernel::dense(3, 4, 3, 2, 1, true);
  k.init_uniform(rng);
  for (double& b : k.bias) b = rng.uniform(-1, 1);
  const Tensor x = random_uniform(Dims{1, 3, 8, 8}, rng);
  const Tensor proj = random_uniform(Dims{1, 4, 4, 4}, rng);
  check_input_grad([&](Tape& t, ValueId v) { return t.dense_conv(v, k); },
                   [&](const Tensor& v) { return dense_conv(v, k); }, x, proj);

  Tape tape;
  const ValueId in = tape.leaf(x);
  const ValueId out = tape.dense_conv(in, k);
  tape.backward(out, proj);
  const Tape::ParamGrads& pg = tape.param_grads(out);
  ASSERT_EQ(pg.weights.size(), k.weights.size());
  int checked = 0;
  for (size_t wi = 0; wi < k.weights.size(); wi += 7) {
    const double saved = k.weights[wi];
    k.weights[wi] = saved + kFdStep;
    const double up = loss_of([&](const Tensor& v) { return dense_conv(v, k); }, x, proj);
    k.weights[wi] = saved - kFdStep;
    const double down = loss_of([&](const Tensor& v) { return dense_conv(v, k); }, x, proj);
    k.weights[wi] = saved;
    if (std::abs(pg.weights[wi]) < 1e-4) continue;
    EXPECT_LE(rel_err(pg.weights[wi], (up - down) / (2.0 * kFdStep)), kTol);
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(TapeGrad, GeluBatchNormScale) {
  Rng rng(8);
  const Tensor x = random_uniform(Dims{1, 3, 4, 4}, rng);
  const Tensor proj = random_uniform(x.dims(), rng);
  BatchNorm bn;
  bn.gamma = {1.5, -0.5, 2.0};
  bn.beta = {0.1, 0.2, -0.3};
  bn.mean = {0.4, -0.1, 0.0};
  bn.var = {1.2, 0.8, 2.0};
  const std::vector<double> lambda{0.3, -1.2, 0.7};

  check_input_grad([&](Tape& t, ValueId v) { return t.gelu(v); },
                   [](const Tensor& v) { return gelu(v); }, x, proj);
  check_input_grad([&](Tape& t, ValueId v) { return t.batch_norm_frozen(v, bn); },
                   [&](const Tensor& v) { return batch_norm_frozen(v, bn); }, x, proj);
  check_input_grad(
      [&](Tape& t, ValueId v) { return t.scale_channels(v, lambda); },
      [&](const Tensor& v) { return scale_channels(v, lambda); }, x, proj);
}

TEST(TapeGrad, BatchNormParamGrads) {
  Rng rng(9);
  const Tensor x = random_uniform(Dims{1, 2, 3, 3}, rng);
  const Tensor proj = random_uniform(x.dims(), rng);
  BatchNorm bn;
  bn.gamma = {1.1, 0.9};
  bn.beta = {0.0, 0.5};
  bn.mean = {0.2, -0.2};
  bn.var = {1.5, 0.7};

  Tape tape;
  const ValueId in = tape.leaf(x);
  const ValueId out = tape.batch_norm_frozen(in, bn);
  tape.backward(out, proj);
  const Tape::ParamGrads& pg = tape.param_grads(out);
  for (int c = 0; c < 2; ++c) {
    const double saved = bn.gamma[c];
    bn.gamma[c] = saved + kFdStep;
    const double up = loss_of([&](const Tensor& v) { return batch_norm_frozen(v, bn); }, x, proj);
    bn.gamma[c] = saved - kFdStep;
    const double down =
        loss_of([&](const Tensor& v) { return batch_norm_frozen(v, bn); }, x, proj);
    bn.gamma[c] = saved;
    EXPECT_LE(rel_err(pg.weights[c], (up - down) / (2.0 * kFdStep)), kTol);
  }
  // beta gradient is just the per-channel upstream sum
  for (int c = 0; c < 2; ++c) {
    double want = 0.0;
    for (int h = 0; h < 3; ++h) {
      for (int w = 0; w < 3; ++w) want += proj.at(0, c, h, w);
    }
    EXPECT_NEAR(pg.bias[c], want, 1e-12);
  }
}

TEST(TapeGrad, HadamardBothSides) {
  Rng rng(10);
  const Tensor a = random_uniform(Dims{1, 2, 3, 3}, rng);
  const Tensor b = random_uniform(a.dims(), rng);
  const Tensor proj = random_uniform(a.dims(), rng);

  Tape tape;
  const ValueId ia = tape.leaf(a);
  const ValueId ib = tape.leaf(b);
  const ValueId out = tape.hadamard(ia, ib);
  tape.backward(out, proj);
  for (long long i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(tape.grad(ia)[i], proj[i] * b[i], 1e-12);
    EXPECT_NEAR(tape.grad(ib)[i], proj[i] * a[i], 1e-12);
  }
}

TEST(TapeGrad, FanOutAccumulates) {
  // y = x (.) x  =>  dy/dx = 2 * proj * x through two hadamard inputs.
  Rng rng(11);
  const Tensor x = random_uniform(Dims{1, 1, 2, 2}, rng);
  const Tensor proj = random_uniform(x.dims(), rng);
  Tape tape;
  const ValueId in = tape.leaf(x);
  const ValueId out = tape.hadamard(in, in);
  tape.backward(out, proj);
  for (long long i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(tape.grad(in)[i], 2.0 * proj[i] * x[i], 1e-12);
  }
}

TEST(TapeGrad, AddGapLinear) {
  Rng rng(12);
  const Tensor x = random_uniform(Dims{2, 3, 4, 4}, rng);
  Linear lin;
  lin.in = 3;
  lin.out = 2;
  lin.weights = {0.5, -1.0, 2.0, 1.5, 0.25, -0.75};
  lin.bias = {0.1, -0.2};
  const Tensor proj = random_uniform(Dims{2, 2, 1, 1}, rng);

  auto record = [&](Tape& t, ValueId v) {
    const ValueId doubled = t.add(v, v);
    return t.linear(t.global_avg_pool(doubled), lin);
  };
  auto eager = [&](const Tensor& v) {
    Tensor doubled(v.dims());
    for (long long i = 0; i < v.size(); ++i) doubled[i] = v[i] + v[i];
    Tensor pooled(Dims{v.dims().n, v.dims().c, 1, 1});
    for (int n = 0; n < v.dims().n; ++n) {
      for (int c = 0; c < v.dims().c; ++c) {
        double sum = 0.0;
        for (int h = 0; h < v.dims().h; ++h) {
          for (int w = 0; w < v.dims().w; ++w) sum += doubled.at(n, c, h, w);
        }
        pooled.at(n, c, 0, 0) = sum / (v.dims().h * v.dims().w);
      }
    }
    Tensor out(Dims{v.dims().n, 2, 1, 1});
    for (int n = 0; n < v.dims().n; ++n) {
      for (int o = 0; o < 2; ++o) {
        double acc = lin.bias[o];
        for (int i = 0; i < 3; ++i) acc += lin.weights[o * 3 + i] * pooled.at(n, i, 0, 0);
        out.at(n, o, 0, 0) = acc;
      }
    }
    return out;
  };
  check_input_grad(record, eager, x, proj);
}

TEST(TapeGrad, SecondBackwardResets) {
  Rng rng(13);
  const Tensor x = random_uniform(Dims{1, 1, 2, 2}, rng);
  Tape tape;
  const ValueId in = tape.leaf(x);
  const ValueId out = tape.gelu(in);
  const Tensor ones = Tensor::full(x.dims(), 1.0);
  tape.backward(out, ones);
  const Tensor first = tape.grad(in);
  tape.backward(out, ones);
  EXPECT_LE(max_abs_diff(first, tape.grad(in)), 0.0);  // not doubled
}

TEST(TapeGrad, SkipsParamGradsWhenDisabled) {
  Rng rng(14);
  ConvKernel k = ConvKernel::pointwise(2, 2, true);
  k.init_uniform(rng);
  const Tensor x = random_uniform(Dims{1, 2, 3, 3}, rng);
  Tape tape;
  const ValueId in = tape.leaf(x);
  const ValueId out = tape.pointwise_conv(in, k);
  tape.backward(out, Tensor::full(x.dims(), 1.0), /*with_param_grads=*/false);
  EXPECT_TRUE(tape.param_grads(out).weights.empty());
  EXPECT_TRUE(tape.has_grad(in));
}

TEST(Tape, RejectsBadUpstreamDims) {
  Tape tape;
  const ValueId in = tape.leaf(Tensor(1, 1, 2, 2));
  EXPECT_THROW(tape.backward(in, Tensor(1, 1, 2, 3)), ShapeError);
}
