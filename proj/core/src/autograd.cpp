#include "lska/autograd.hpp"

#include <cmath>
#include <cstring>

namespace lska {

namespace {

enum class Op {
  Leaf,
  DwConv,
  PointwiseConv,
  DenseConv,
  Gelu,
  BatchNorm,
  ScaleChannels,
  Hadamard,
  Add,
  GlobalAvgPool,
  Linear,
};

// y = conv(x, w) with same-padding stride 1 is self-adjoint up to a spatial
// flip of the kernel, so dx = conv(dy, flip(w)).
ConvKernel flip_depthwise(const ConvKernel& k) {
  ConvKernel f = k;
  f.bias.clear();  // the adjoint carries no bias
  const int kh = k.kh, kw = k.kw;
  for (int c = 0; c < k.channels_in; ++c) {
    const double* src = k.weights.data() + static_cast<size_t>(c) * kh * kw;
    double* dst = f.weights.data() + static_cast<size_t>(c) * kh * kw;
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx)
        dst[static_cast<size_t>(ky) * kw + kx] =
            src[static_cast<size_t>(kh - 1 - ky) * kw + (kw - 1 - kx)];
  }
  return f;
}

void accumulate(Tensor& dst, const Tensor& src) {
  for (long long i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

struct Node {
  Op op = Op::Leaf;
  int a = -1;
  int b = -1;
  Tensor value;
  Tensor grad;
  bool has_grad = false;
  const ConvKernel* kernel = nullptr;
  const BatchNorm* bn = nullptr;
  std::vector<double> lambda;
  const Linear* lin = nullptr;
  Tape::ParamGrads pgrads;
};

struct Tape::Impl {
  std::vector<Node> nodes;

  ValueId push(Node node) {
    nodes.push_back(std::move(node));
    return static_cast<ValueId>(nodes.size()) - 1;
  }
  Node& at(ValueId id) {
    if (id < 0 || id >= static_cast<ValueId>(nodes.size())) {
      throw ShapeError("tape: value id " + std::to_string(id) + " out of range");
    }
    return nodes[static_cast<size_t>(id)];
  }
  Tensor& grad_slot(ValueId id) {
    Node& n = at(id);
    if (!n.has_grad) {
      n.grad = Tensor(n.value.dims());
      n.has_grad = true;
    }
    return n.grad;
  }
};

Tape::Tape() : impl_(std::make_unique<Impl>()) {}
Tape::~Tape() = default;

int Tape::num_values() const { return static_cast<int>(impl_->nodes.size()); }

const Tensor& Tape::value(ValueId id) const { return impl_->at(id).value; }

bool Tape::has_grad(ValueId id) const { return impl_->at(id).has_grad; }

const Tensor& Tape::grad(ValueId id) const {
  const Node& n = impl_->at(id);
  if (!n.has_grad) throw ShapeError("tape: no gradient recorded for value " + std::to_string(id));
  return n.grad;
}

const Tape::ParamGrads& Tape::param_grads(ValueId id) const { return impl_->at(id).pgrads; }

ValueId Tape::leaf(Tensor x) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(x);
  return impl_->push(std::move(n));
}

ValueId Tape::dw_conv(ValueId x, const ConvKernel& kernel) {
  Node n;
  n.op = Op::DwConv;
  n.a = x;
  n.kernel = &kernel;
  n.value = lska::dw_conv(impl_->at(x).value, kernel);
  return impl_->push(std::move(n));
}

ValueId Tape::pointwise_conv(ValueId x, const ConvKernel& kernel) {
  Node n;
  n.op = Op::PointwiseConv;
  n.a = x;
  n.kernel = &kernel;
  n.value = lska::pointwise_conv(impl_->at(x).value, kernel);
  return impl_->push(std::move(n));
}

ValueId Tape::dense_conv(ValueId x, const ConvKernel& kernel) {
  Node n;
  n.op = Op::DenseConv;
  n.a = x;
  n.kernel = &kernel;
  n.value = lska::dense_conv(impl_->at(x).value, kernel);
  return impl_->push(std::move(n));
}

ValueId Tape::gelu(ValueId x) {
  Node n;
  n.op = Op::Gelu;
  n.a = x;
  n.value = lska::gelu(impl_->at(x).value);
  return impl_->push(std::move(n));
}

ValueId Tape::batch_norm_frozen(ValueId x, const BatchNorm& bn) {
  Node n;
  n.op = Op::BatchNorm;
  n.a = x;
  n.bn = &bn;
  n.value = lska::batch_norm_frozen(impl_->at(x).value, bn);
  return impl_->push(std::move(n));
}

ValueId Tape::scale_channels(ValueId x, std::span<const double> lambda) {
  Node n;
  n.op = Op::ScaleChannels;
  n.a = x;
  n.lambda.assign(lambda.begin(), lambda.end());
  n.value = lska::scale_channels(impl_->at(x).value, lambda);
  return impl_->push(std::move(n));
}

ValueId Tape::hadamard(ValueId a, ValueId b) {
  Node n;
  n.op = Op::Hadamard;
  n.a = a;
  n.b = b;
  n.value = lska::hadamard(impl_->at(a).value, impl_->at(b).value);
  return impl_->push(std::move(n));
}

ValueId Tape::add(ValueId a, ValueId b) {
  const Tensor& ta = impl_->at(a).value;
  const Tensor& tb = impl_->at(b).value;
  if (!(ta.dims() == tb.dims())) {
    throw ShapeError("add: dims mismatch " + ta.dims().str() + " vs " + tb.dims().str());
  }
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = Tensor(ta.dims());
  for (long long i = 0; i < ta.size(); ++i) n.value[i] = ta[i] + tb[i];
  return impl_->push(std::move(n));
}

ValueId Tape::global_avg_pool(ValueId x) {
  const Tensor& t = impl_->at(x).value;
  const auto [bn, c, h, w] = t.dims();
  Node n;
  n.op = Op::GlobalAvgPool;
  n.a = x;
  n.value = Tensor(Dims{bn, c, 1, 1});
  const long long plane = static_cast<long long>(h) * w;
  for (int ni = 0; ni < bn; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const double* src = t.data() + t.index(ni, ci, 0, 0);
      double sum = 0.0;
      for (long long i = 0; i < plane; ++i) sum += src[i];
      n.value.at(ni, ci, 0, 0) = sum / static_cast<double>(plane);
    }
  }
  return impl_->push(std::move(n));
}

ValueId Tape::linear(ValueId x, const Linear& layer) {
  const Tensor& t = impl_->at(x).value;
  const auto [bn, c, h, w] = t.dims();
  if (h != 1 || w != 1 || c != layer.in) {
    throw ShapeError("linear: expected (N," + std::to_string(layer.in) + ",1,1), got " +
                     t.dims().str());
  }
  Node n;
  n.op = Op::Linear;
  n.a = x;
  n.lin = &layer;
  n.value = Tensor(Dims{bn, layer.out, 1, 1});
  for (int ni = 0; ni < bn; ++ni) {
    for (int oi = 0; oi < layer.out; ++oi) {
      double acc = layer.bias.empty() ? 0.0 : layer.bias[oi];
      const double* wrow = layer.weights.data() + static_cast<size_t>(oi) * layer.in;
      for (int ii = 0; ii < layer.in; ++ii) acc += wrow[ii] * t.at(ni, ii, 0, 0);
      n.value.at(ni, oi, 0, 0) = acc;
    }
  }
  return impl_->push(std::move(n));
}

namespace {

// dL/dw and dL/dx for a depth-wise conv recorded on the tape.
void dw_conv_backward(const Tensor& x, const ConvKernel& k, const Tensor& gy, Tensor& gx_out,
                      Tape::ParamGrads* pg) {
  // Input gradient: correlate the upstream gradient with the flipped kernel.
  accumulate(gx_out, dw_conv(gy, flip_depthwise(k)));

  if (!pg) return;
  pg->weights.assign(k.weights.size(), 0.0);
  if (!k.bias.empty()) pg->bias.assign(k.bias.size(), 0.0);
  const auto [n, c, h, w] = x.dims();
  const int kh = k.kh, kw = k.kw, dil = k.dilation;
  const int pad_y = dil * (kh - 1) / 2;
  const int pad_x = dil * (kw - 1) / 2;
  const int ph = h + 2 * pad_y;
  const int pw = w + 2 * pad_x;
  std::vector<double> padded(static_cast<size_t>(ph) * pw, 0.0);
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      for (int y = 0; y < h; ++y) {
        std::memcpy(padded.data() + static_cast<size_t>(y + pad_y) * pw + pad_x,
                    x.data() + x.index(ni, ci, y, 0), sizeof(double) * w);
      }
      double* gw = pg->weights.data() + static_cast<size_t>(ci) * kh * kw;
      const double* g = gy.data() + gy.index(ni, ci, 0, 0);
      if (!k.bias.empty()) {
        double acc = 0.0;
        for (long long i = 0; i < static_cast<long long>(h) * w; ++i) acc += g[i];
        pg->bias[ci] += acc;
      }
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          double acc = 0.0;
          for (int oy = 0; oy < h; ++oy) {
            const double* row = padded.data() + static_cast<size_t>(oy + ky * dil) * pw + kx * dil;
            const double* grow = g + static_cast<long long>(oy) * w;
            for (int ox = 0; ox < w; ++ox) acc += row[ox] * grow[ox];
          }
          gw[static_cast<size_t>(ky) * kw + kx] += acc;
        }
      }
    }
  }
}

void pointwise_backward(const Tensor& x, const ConvKernel& k, const Tensor& gy, Tensor& gx_out,
                        Tape::ParamGrads* pg) {
  const auto [n, c, h, w] = x.dims();
  const int co = k.channels_out;
  const long long plane = static_cast<long long>(h) * w;
  for (int ni = 0; ni < n; ++ni) {
    for (int ii = 0; ii < c; ++ii) {
      double* dst = gx_out.data() + gx_out.index(ni, ii, 0, 0);
      for (int oi = 0; oi < co; ++oi) {
        const double wv = k.weights[static_cast<size_t>(oi) * c + ii];
        const double* g = gy.data() + gy.index(ni, oi, 0, 0);
        for (long long i = 0; i < plane; ++i) dst[i] += wv * g[i];
      }
    }
  }
  if (!pg) return;
  pg->weights.assign(k.weights.size(), 0.0);
  for (int ni = 0; ni < n; ++ni) {
    for (int oi = 0; oi < co; ++oi) {
      const double* g = gy.data() + gy.index(ni, oi, 0, 0);
      double* grow = pg->weights.data() + static_cast<size_t>(oi) * c;
      for (int ii = 0; ii < c; ++ii) {
        const double* src = x.data() + x.index(ni, ii, 0, 0);
        double acc = 0.0;
        for (long long i = 0; i < plane; ++i) acc += g[i] * src[i];
        grow[ii] += acc;
      }
    }
  }
  if (!k.bias.empty()) {
    pg->bias.assign(k.bias.size(), 0.0);
    for (int ni = 0; ni < n; ++ni) {
      for (int oi = 0; oi < co; ++oi) {
        const double* g = gy.data() + gy.index(ni, oi, 0, 0);
        double acc = 0.0;
        for (long long i = 0; i < plane; ++i) acc += g[i];
        pg->bias[oi] += acc;
      }
    }
  }
}

void dense_conv_backward(const Tensor& x, const ConvKernel& k, const Tensor& gy, Tensor& gx_out,
                         Tape::ParamGrads* pg) {
  const auto [n, c, h, w] = x.dims();
  const int kh = k.kh, kw = k.kw, s = k.stride, p = k.pad;
  const int oh = gy.dims().h;
  const int ow = gy.dims().w;
  const int co = k.channels_out;
  const int ph = h + 2 * p;
  const int pw = w + 2 * p;

  if (pg) {
    pg->weights.assign(k.weights.size(), 0.0);
    if (!k.bias.empty()) pg->bias.assign(k.bias.size(), 0.0);
  }

  // Scatter into a padded buffer so tap indices never need bounds checks;
  // the interior is then folded back into gx.
  std::vector<double> gpad(static_cast<size_t>(ph) * pw);
  std::vector<double> xpad(static_cast<size_t>(ph) * pw, 0.0);
  for (int ni = 0; ni < n; ++ni) {
    for (int ii = 0; ii < c; ++ii) {
      std::fill(gpad.begin(), gpad.end(), 0.0);
      for (int y = 0; y < h; ++y) {
        std::memcpy(xpad.data() + static_cast<size_t>(y + p) * pw + p,
                    x.data() + x.index(ni, ii, y, 0), sizeof(double) * w);
      }
      for (int oi = 0; oi < co; ++oi) {
        const double* wk = k.weights.data() + (static_cast<size_t>(oi) * c + ii) * kh * kw;
        double* gw = pg ? pg->weights.data() + (static_cast<size_t>(oi) * c + ii) * kh * kw
                        : nullptr;
        const double* g = gy.data() + gy.index(ni, oi, 0, 0);
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const double gv = g[static_cast<long long>(oy) * ow + ox];
            if (gv == 0.0 && !gw) continue;
            const size_t base = static_cast<size_t>(oy * s) * pw + ox * s;
            for (int ky = 0; ky < kh; ++ky) {
              double* grow = gpad.data() + base + static_cast<size_t>(ky) * pw;
              const double* xrow = xpad.data() + base + static_cast<size_t>(ky) * pw;
              const double* wrow = wk + static_cast<size_t>(ky) * kw;
              double* gwrow = gw ? gw + static_cast<size_t>(ky) * kw : nullptr;
              for (int kx = 0; kx < kw; ++kx) {
                grow[kx] += wrow[kx] * gv;
                if (gwrow) gwrow[kx] += xrow[kx] * gv;
              }
            }
          }
        }
      }
      double* dst = gx_out.data() + gx_out.index(ni, ii, 0, 0);
      for (int y = 0; y < h; ++y) {
        const double* row = gpad.data() + static_cast<size_t>(y + p) * pw + p;
        for (int xx = 0; xx < w; ++xx) dst[static_cast<long long>(y) * w + xx] += row[xx];
      }
    }
  }
  if (pg && !k.bias.empty()) {
    for (int ni = 0; ni < n; ++ni) {
      for (int oi = 0; oi < co; ++oi) {
        const double* g = gy.data() + gy.index(ni, oi, 0, 0);
        double acc = 0.0;
        for (long long i = 0; i < static_cast<long long>(oh) * ow; ++i) acc += g[i];
        pg->bias[oi] += acc;
      }
    }
  }
}

}  // namespace

void Tape::backward(ValueId root, const Tensor& upstream, bool with_param_grads) {
  Node& root_node = impl_->at(root);
  if (!(upstream.dims() == root_node.value.dims())) {
    throw ShapeError("backward: upstream dims " + upstream.dims().str() + " vs root " +
                     root_node.value.dims().str());
  }
  for (Node& n : impl_->nodes) {
    n.has_grad = false;
    n.grad = Tensor();
    n.pgrads = ParamGrads{};
  }
  impl_->grad_slot(root);
  accumulate(impl_->at(root).grad, upstream);

  for (ValueId id = root; id >= 0; --id) {
    Node& n = impl_->at(id);
    if (!n.has_grad) continue;
    const Tensor& gy = n.grad;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::DwConv: {
        Tensor& gx = impl_->grad_slot(n.a);
        dw_conv_backward(impl_->at(n.a).value, *n.kernel, gy, gx,
                         with_param_grads ? &n.pgrads : nullptr);
        break;
      }
      case Op::PointwiseConv: {
        Tensor& gx = impl_->grad_slot(n.a);
        pointwise_backward(impl_->at(n.a).value, *n.kernel, gy, gx,
                           with_param_grads ? &n.pgrads : nullptr);
        break;
      }
      case Op::DenseConv: {
        Tensor& gx = impl_->grad_slot(n.a);
        dense_conv_backward(impl_->at(n.a).value, *n.kernel, gy, gx,
                            with_param_grads ? &n.pgrads : nullptr);
        break;
      }
      case Op::Gelu: {
        Tensor& gx = impl_->grad_slot(n.a);
        const Tensor& x = impl_->at(n.a).value;
        for (long long i = 0; i < gx.size(); ++i) gx[i] += gy[i] * gelu_grad_scalar(x[i]);
        break;
      }
      case Op::BatchNorm: {
        Tensor& gx = impl_->grad_slot(n.a);
        const Tensor& x = impl_->at(n.a).value;
        const BatchNorm& bn = *n.bn;
        const auto [bs, c, h, w] = x.dims();
        const long long plane = static_cast<long long>(h) * w;
        if (with_param_grads) {
          n.pgrads.weights.assign(bn.gamma.size(), 0.0);
          n.pgrads.bias.assign(bn.beta.size(), 0.0);
        }
        for (int ni = 0; ni < bs; ++ni) {
          for (int ci = 0; ci < c; ++ci) {
            const double inv = 1.0 / std::sqrt(bn.var[ci] + bn.eps);
            const double scale = bn.gamma[ci] * inv;
            const double* g = gy.data() + gy.index(ni, ci, 0, 0);
            const double* src = x.data() + x.index(ni, ci, 0, 0);
            double* dst = gx.data() + gx.index(ni, ci, 0, 0);
            double ggamma = 0.0, gbeta = 0.0;
            for (long long i = 0; i < plane; ++i) {
              dst[i] += g[i] * scale;
              if (with_param_grads) {
                ggamma += g[i] * (src[i] - bn.mean[ci]) * inv;
                gbeta += g[i];
              }
            }
            if (with_param_grads) {
              n.pgrads.weights[ci] += ggamma;
              n.pgrads.bias[ci] += gbeta;
            }
          }
        }
        break;
      }
      case Op::ScaleChannels: {
        Tensor& gx = impl_->grad_slot(n.a);
        const Tensor& x = impl_->at(n.a).value;
        const auto [bs, c, h, w] = x.dims();
        const long long plane = static_cast<long long>(h) * w;
        if (with_param_grads) n.pgrads.weights.assign(n.lambda.size(), 0.0);
        for (int ni = 0; ni < bs; ++ni) {
          for (int ci = 0; ci < c; ++ci) {
            const double* g = gy.data() + gy.index(ni, ci, 0, 0);
            const double* src = x.data() + x.index(ni, ci, 0, 0);
            double* dst = gx.data() + gx.index(ni, ci, 0, 0);
            double gl = 0.0;
            for (long long i = 0; i < plane; ++i) {
              dst[i] += g[i] * n.lambda[ci];
              if (with_param_grads) gl += g[i] * src[i];
            }
            if (with_param_grads) n.pgrads.weights[ci] += gl;
          }
        }
        break;
      }
      case Op::Hadamard: {
        Tensor& ga = impl_->grad_slot(n.a);
        const Tensor& vb = impl_->at(n.b).value;
        for (long long i = 0; i < ga.size(); ++i) ga[i] += gy[i] * vb[i];
        Tensor& gb = impl_->grad_slot(n.b);
        const Tensor& va = impl_->at(n.a).value;
        for (long long i = 0; i < gb.size(); ++i) gb[i] += gy[i] * va[i];
        break;
      }
      case Op::Add: {
        Tensor& ga = impl_->grad_slot(n.a);
        accumulate(ga, gy);
        Tensor& gb = impl_->grad_slot(n.b);
        accumulate(gb, gy);
        break;
      }
      case Op::GlobalAvgPool: {
        Tensor& gx = impl_->grad_slot(n.a);
        const auto [bs, c, h, w] = gx.dims();
        const long long plane = static_cast<long long>(h) * w;
        const double inv = 1.0 / static_cast<double>(plane);
        for (int ni = 0; ni < bs; ++ni) {
          for (int ci = 0; ci < c; ++ci) {
            const double gv = gy.at(ni, ci, 0, 0) * inv;
            double* dst = gx.data() + gx.index(ni, ci, 0, 0);
            for (long long i = 0; i < plane; ++i) dst[i] += gv;
          }
        }
        break;
      }
      case Op::Linear: {
        Tensor& gx = impl_->grad_slot(n.a);
        const Tensor& x = impl_->at(n.a).value;
        const Linear& lin = *n.lin;
        const int bs = x.dims().n;
        if (with_param_grads) {
          n.pgrads.weights.assign(lin.weights.size(), 0.0);
          if (!lin.bias.empty()) n.pgrads.bias.assign(lin.bias.size(), 0.0);
        }
        for (int ni = 0; ni < bs; ++ni) {
          for (int oi = 0; oi < lin.out; ++oi) {
            const double gv = gy.at(ni, oi, 0, 0);
            const double* wrow = lin.weights.data() + static_cast<size_t>(oi) * lin.in;
            for (int ii = 0; ii < lin.in; ++ii) {
              gx.at(ni, ii, 0, 0) += gv * wrow[ii];
              if (with_param_grads) {
                n.pgrads.weights[static_cast<size_t>(oi) * lin.in + ii] +=
                    gv * x.at(ni, ii, 0, 0);
              }
            }
            if (with_param_grads && !lin.bias.empty()) n.pgrads.bias[oi] += gv;
          }
        }
        break;
      }
    }
  }
}

}  // namespace lska
