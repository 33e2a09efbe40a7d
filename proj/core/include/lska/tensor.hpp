#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lska {

// Thrown when tensor/kernel shapes do not line up.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown for invalid module/model configuration (bad kernel extents etc).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Dims {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  long long elems() const {
    return static_cast<long long>(n) * c * h * w;
  }
  bool operator==(const Dims&) const = default;
  std::string str() const;
};

// Dense NCHW tensor, row-major, double precision.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims dims) : dims_(dims), data_(static_cast<size_t>(dims.elems()), 0.0) {}
  Tensor(int n, int c, int h, int w) : Tensor(Dims{n, c, h, w}) {}

  static Tensor full(Dims dims, double value);

  const Dims& dims() const { return dims_; }
  long long size() const { return dims_.elems(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

  double& operator[](long long i) { return data_[static_cast<size_t>(i)]; }
  double operator[](long long i) const { return data_[static_cast<size_t>(i)]; }

  size_t index(int n, int c, int h, int w) const {
    return static_cast<size_t>(((static_cast<long long>(n) * dims_.c + c) * dims_.h + h) * dims_.w + w);
  }

 private:
  Dims dims_;
  std::vector<double> data_;
};

bool all_finite(const Tensor& x);
double max_abs_diff(const Tensor& a, const Tensor& b);

// out[i] = a[i] * b[i]; dims must match exactly.
Tensor hadamard(const Tensor& a, const Tensor& b);

// Exact erf-based GELU: x * Phi(x).
double gelu_scalar(double x);
double gelu_grad_scalar(double x);
Tensor gelu(const Tensor& x);

// Per-channel batch norm parameters. `mean`/`var` are the frozen statistics
// used outside of batch-stats mode.
struct BatchNorm {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> mean;
  std::vector<double> var;
  double eps = 1e-5;

  static BatchNorm identity(int channels, double eps = 1e-5);
  int channels() const { return static_cast<int>(gamma.size()); }
};

// Standardize with the frozen statistics, then apply the affine.
Tensor batch_norm_frozen(const Tensor& x, const BatchNorm& bn);

// Standardize with statistics computed over the (N,H,W) axes of `x`.
Tensor batch_norm_batch_stats(const Tensor& x, std::span<const double> gamma,
                              std::span<const double> beta, double eps);

// out[n,c,h,w] = lambda[c] * x[n,c,h,w]
Tensor scale_channels(const Tensor& x, std::span<const double> lambda);

}  // namespace lska
