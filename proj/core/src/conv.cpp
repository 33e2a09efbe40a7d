#include "lska/conv.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace lska {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

// Copies one input plane into `padded` (interior only; the border must
// already be zero and stays zero between calls).
void fill_padded(const Tensor& x, int n, int c, std::vector<double>& padded, int pw_stride,
                 int pad_y, int pad_x) {
  const int h = x.dims().h;
  const int w = x.dims().w;
  const double* src = x.data() + x.index(n, c, 0, 0);
  for (int y = 0; y < h; ++y) {
    std::memcpy(padded.data() + static_cast<size_t>(y + pad_y) * pw_stride + pad_x, src + static_cast<long long>(y) * w,
                sizeof(double) * w);
  }
}

}  // namespace

ConvKernel ConvKernel::depthwise(int channels, int kh, int kw, int dilation, bool with_bias) {
  if (channels <= 0 || kh <= 0 || kw <= 0 || dilation <= 0) {
    throw ConfigError("depthwise kernel: non-positive extent");
  }
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ConfigError("depthwise kernel: extents must be odd for same-padding, got " +
                      std::to_string(kh) + "x" + std::to_string(kw));
  }
  ConvKernel k;
  if (kh == 1 && kw > 1) {
    k.kind = KernelKind::DepthwiseHorizontal;
  } else if (kw == 1 && kh > 1) {
    k.kind = KernelKind::DepthwiseVertical;
  } else {
    k.kind = KernelKind::Depthwise2d;
  }
  k.channels_in = channels;
  k.channels_out = channels;
  k.kh = kh;
  k.kw = kw;
  k.dilation = dilation;
  k.weights.assign(static_cast<size_t>(channels) * kh * kw, 0.0);
  if (with_bias) k.bias.assign(channels, 0.0);
  return k;
}

ConvKernel ConvKernel::pointwise(int channels_in, int channels_out, bool with_bias) {
  if (channels_in <= 0 || channels_out <= 0) {
    throw ConfigError("pointwise kernel: non-positive channel count");
  }
  ConvKernel k;
  k.kind = KernelKind::Pointwise;
  k.channels_in = channels_in;
  k.channels_out = channels_out;
  k.weights.assign(static_cast<size_t>(channels_in) * channels_out, 0.0);
  if (with_bias) k.bias.assign(channels_out, 0.0);
  return k;
}

ConvKernel ConvKernel::dense(int channels_in, int channels_out, int k, int stride, int pad,
                             bool with_bias) {
  if (channels_in <= 0 || channels_out <= 0 || k <= 0 || stride <= 0 || pad < 0) {
    throw ConfigError("dense kernel: invalid geometry");
  }
  ConvKernel c;
  c.kind = KernelKind::Dense;
  c.channels_in = channels_in;
  c.channels_out = channels_out;
  c.kh = k;
  c.kw = k;
  c.stride = stride;
  c.pad = pad;
  c.weights.assign(static_cast<size_t>(channels_out) * channels_in * k * k, 0.0);
  if (with_bias) c.bias.assign(channels_out, 0.0);
  return c;
}

int ConvKernel::fan_in() const {
  return is_depthwise() ? kh * kw : channels_in * kh * kw;
}

void ConvKernel::init_uniform(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in()));
  for (double& w : weights) w = rng.uniform(-bound, bound);
  for (double& b : bias) b = 0.0;
}

Tensor dw_conv(const Tensor& x, const ConvKernel& kernel, MacCounter* macs) {
  require(kernel.is_depthwise(), "dw_conv: kernel is not depth-wise");
  const auto [n, c, h, w] = x.dims();
  require(kernel.channels_in == c, "dw_conv: kernel channels " +
                                       std::to_string(kernel.channels_in) + " vs input " +
                                       std::to_string(c));
  const int kh = kernel.kh;
  const int kw = kernel.kw;
  const int dil = kernel.dilation;
  const int pad_y = dil * (kh - 1) / 2;
  const int pad_x = dil * (kw - 1) / 2;

  Tensor out(x.dims());
  const int ph = h + 2 * pad_y;
  const int pw = w + 2 * pad_x;
  std::vector<double> padded(static_cast<size_t>(ph) * pw, 0.0);

  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      fill_padded(x, ni, ci, padded, pw, pad_y, pad_x);
      const double* wc = kernel.weights.data() + static_cast<size_t>(ci) * kh * kw;
      const double b = kernel.bias.empty() ? 0.0 : kernel.bias[ci];
      double* dst = out.data() + out.index(ni, ci, 0, 0);
      for (int oy = 0; oy < h; ++oy) {
        for (int ox = 0; ox < w; ++ox) {
          double acc = b;
          for (int ky = 0; ky < kh; ++ky) {
            const double* row = padded.data() + static_cast<size_t>(oy + ky * dil) * pw + ox;
            const double* wrow = wc + static_cast<size_t>(ky) * kw;
            for (int kx = 0; kx < kw; ++kx) acc += wrow[kx] * row[kx * dil];
          }
          dst[static_cast<long long>(oy) * w + ox] = acc;
        }
      }
    }
  }
  if (macs) {
    // Every tap runs against the zero-padded buffer, so the trip count is
    // exactly N*C*H*W*kh*kw — padding taps included.
    macs->macs += static_cast<long long>(n) * c * h * w * kh * kw;
    if (!kernel.bias.empty()) macs->aux_ops += static_cast<long long>(n) * c * h * w;
  }
  return out;
}

Tensor pointwise_conv(const Tensor& x, const ConvKernel& kernel, MacCounter* macs) {
  require(kernel.kind == KernelKind::Pointwise, "pointwise_conv: kernel is not 1x1");
  const auto [n, c, h, w] = x.dims();
  require(kernel.channels_in == c, "pointwise_conv: kernel channels " +
                                       std::to_string(kernel.channels_in) + " vs input " +
                                       std::to_string(c));
  const int co = kernel.channels_out;
  const long long plane = static_cast<long long>(h) * w;
  Tensor out(Dims{n, co, h, w});
  for (int ni = 0; ni < n; ++ni) {
    for (int oi = 0; oi < co; ++oi) {
      double* dst = out.data() + out.index(ni, oi, 0, 0);
      const double b = kernel.bias.empty() ? 0.0 : kernel.bias[oi];
      for (long long i = 0; i < plane; ++i) dst[i] = b;
      const double* wrow = kernel.weights.data() + static_cast<size_t>(oi) * c;
      for (int ii = 0; ii < c; ++ii) {
        const double wv = wrow[ii];
        const double* src = x.data() + x.index(ni, ii, 0, 0);
        for (long long i = 0; i < plane; ++i) dst[i] += wv * src[i];
      }
    }
  }
  if (macs) {
    macs->macs += static_cast<long long>(n) * co * c * plane;
    if (!kernel.bias.empty()) macs->aux_ops += static_cast<long long>(n) * co * plane;
  }
  return out;
}

Tensor dense_conv(const Tensor& x, const ConvKernel& kernel, MacCounter* macs) {
  require(kernel.kind == KernelKind::Dense, "dense_conv: kernel is not dense");
  const auto [n, c, h, w] = x.dims();
  require(kernel.channels_in == c, "dense_conv: kernel channels " +
                                       std::to_string(kernel.channels_in) + " vs input " +
                                       std::to_string(c));
  const int kh = kernel.kh;
  const int kw = kernel.kw;
  const int s = kernel.stride;
  const int p = kernel.pad;
  require(h + 2 * p >= kh && w + 2 * p >= kw, "dense_conv: kernel larger than padded input");
  const int oh = (h + 2 * p - kh) / s + 1;
  const int ow = (w + 2 * p - kw) / s + 1;
  const int co = kernel.channels_out;

  Tensor out(Dims{n, co, oh, ow});
  const int ph = h + 2 * p;
  const int pw = w + 2 * p;
  std::vector<double> padded(static_cast<size_t>(ph) * pw, 0.0);

  for (int ni = 0; ni < n; ++ni) {
    if (!kernel.bias.empty()) {
      for (int oi = 0; oi < co; ++oi) {
        double* dst = out.data() + out.index(ni, oi, 0, 0);
        for (long long i = 0; i < static_cast<long long>(oh) * ow; ++i) dst[i] = kernel.bias[oi];
      }
    }
    for (int ii = 0; ii < c; ++ii) {
      fill_padded(x, ni, ii, padded, pw, p, p);
      for (int oi = 0; oi < co; ++oi) {
        const double* wk =
            kernel.weights.data() + (static_cast<size_t>(oi) * c + ii) * kh * kw;
        double* dst = out.data() + out.index(ni, oi, 0, 0);
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            double acc = 0.0;
            for (int ky = 0; ky < kh; ++ky) {
              const double* row = padded.data() + static_cast<size_t>(oy * s + ky) * pw + ox * s;
              const double* wrow = wk + static_cast<size_t>(ky) * kw;
              for (int kx = 0; kx < kw; ++kx) acc += wrow[kx] * row[kx];
            }
            dst[static_cast<long long>(oy) * ow + ox] += acc;
          }
        }
      }
    }
  }
  if (macs) {
    macs->macs += static_cast<long long>(n) * co * c * oh * ow * kh * kw;
    if (!kernel.bias.empty()) macs->aux_ops += static_cast<long long>(n) * co * oh * ow;
  }
  return out;
}

int receptive_field_analytic(std::span<const std::pair<int, int>> chain) {
  int rf = 1;
  for (const auto& [k, d] : chain) rf += d * (k - 1);
  return rf;
}

SupportExtent impulse_support(const std::function<Tensor(const Tensor&)>& forward,
                              Dims input_dims) {
  Tensor impulse(input_dims);
  impulse.at(0, 0, input_dims.h / 2, input_dims.w / 2) = 1.0;
  const Tensor response = forward(impulse);

  const auto [n, c, h, w] = response.dims();
  int min_y = h, max_y = -1, min_x = w, max_x = -1;
  bool border = false;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double mag = 0.0;
      for (int ci = 0; ci < c; ++ci) mag += std::abs(response.at(0, ci, y, x));
      if (mag > 0.0) {
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        if (y == 0 || y == h - 1 || x == 0 || x == w - 1) border = true;
      }
    }
  }
  SupportExtent ext;
  if (max_y < 0) {
    ext.height = 0;
    ext.width = 0;
  } else {
    ext.height = max_y - min_y + 1;
    ext.width = max_x - min_x + 1;
  }
  ext.conclusive = !border;
  return ext;
}

}  // namespace lska
