#include "lska/tensor.hpp"

#include <cmath>

namespace lska {

std::string Dims::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

Tensor Tensor::full(Dims dims, double value) {
  Tensor t(dims);
  for (long long i = 0; i < t.size(); ++i) t[i] = value;
  return t;
}

bool all_finite(const Tensor& x) {
  for (long long i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) return false;
  }
  return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!(a.dims() == b.dims())) {
    throw ShapeError("max_abs_diff: dims mismatch " + a.dims().str() + " vs " + b.dims().str());
  }
  double worst = 0.0;
  for (long long i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (!(a.dims() == b.dims())) {
    throw ShapeError("hadamard: dims mismatch " + a.dims().str() + " vs " + b.dims().str());
  }
  Tensor out(a.dims());
  for (long long i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

double gelu_scalar(double x) {
  return x * 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
}

double gelu_grad_scalar(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

Tensor gelu(const Tensor& x) {
  Tensor out(x.dims());
  for (long long i = 0; i < x.size(); ++i) out[i] = gelu_scalar(x[i]);
  return out;
}

BatchNorm BatchNorm::identity(int channels, double eps) {
  BatchNorm bn;
  bn.gamma.assign(channels, 1.0);
  bn.beta.assign(channels, 0.0);
  bn.mean.assign(channels, 0.0);
  bn.var.assign(channels, 1.0);
  bn.eps = eps;
  return bn;
}

Tensor batch_norm_frozen(const Tensor& x, const BatchNorm& bn) {
  if (bn.channels() != x.dims().c) {
    throw ShapeError("batch_norm: parameter length " + std::to_string(bn.channels()) +
                     " vs channels " + std::to_string(x.dims().c));
  }
  if (bn.eps <= 0.0) throw ConfigError("batch_norm: eps must be positive");
  const auto [n, c, h, w] = x.dims();
  const long long plane = static_cast<long long>(h) * w;
  Tensor out(x.dims());
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const double scale = bn.gamma[ci] / std::sqrt(bn.var[ci] + bn.eps);
      const double shift = bn.beta[ci] - bn.mean[ci] * scale;
      const double* src = x.data() + x.index(ni, ci, 0, 0);
      double* dst = out.data() + out.index(ni, ci, 0, 0);
      for (long long i = 0; i < plane; ++i) dst[i] = src[i] * scale + shift;
    }
  }
  return out;
}

Tensor batch_norm_batch_stats(const Tensor& x, std::span<const double> gamma,
                              std::span<const double> beta, double eps) {
  const auto [n, c, h, w] = x.dims();
  if (static_cast<int>(gamma.size()) != c || static_cast<int>(beta.size()) != c) {
    throw ShapeError("batch_norm: gamma/beta length " + std::to_string(gamma.size()) + "/" +
                     std::to_string(beta.size()) + " vs channels " + std::to_string(c));
  }
  if (eps <= 0.0) throw ConfigError("batch_norm: eps must be positive");
  const long long count = static_cast<long long>(n) * h * w;
  const long long plane = static_cast<long long>(h) * w;
  Tensor out(x.dims());
  for (int ci = 0; ci < c; ++ci) {
    double sum = 0.0;
    for (int ni = 0; ni < n; ++ni) {
      const double* src = x.data() + x.index(ni, ci, 0, 0);
      for (long long i = 0; i < plane; ++i) sum += src[i];
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (int ni = 0; ni < n; ++ni) {
      const double* src = x.data() + x.index(ni, ci, 0, 0);
      for (long long i = 0; i < plane; ++i) sq += (src[i] - mean) * (src[i] - mean);
    }
    const double var = sq / static_cast<double>(count);
    const double scale = gamma[ci] / std::sqrt(var + eps);
    const double shift = beta[ci] - mean * scale;
    for (int ni = 0; ni < n; ++ni) {
      const double* src = x.data() + x.index(ni, ci, 0, 0);
      double* dst = out.data() + out.index(ni, ci, 0, 0);
      for (long long i = 0; i < plane; ++i) dst[i] = src[i] * scale + shift;
    }
  }
  return out;
}

Tensor scale_channels(const Tensor& x, std::span<const double> lambda) {
  const auto [n, c, h, w] = x.dims();
  if (static_cast<int>(lambda.size()) != c) {
    throw ShapeError("scale_channels: lambda length " + std::to_string(lambda.size()) +
                     " vs channels " + std::to_string(c));
  }
  const long long plane = static_cast<long long>(h) * w;
  Tensor out(x.dims());
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const double* src = x.data() + x.index(ni, ci, 0, 0);
      double* dst = out.data() + out.index(ni, ci, 0, 0);
      for (long long i = 0; i < plane; ++i) dst[i] = src[i] * lambda[ci];
    }
  }
  return out;
}

}  // namespace lska
