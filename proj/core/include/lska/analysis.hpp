#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "lska/backbone.hpp"

namespace lska {

// Normalized |input-gradient| heatmap; entries sum to 1.
struct ErfMap {
  int height = 0;
  int width = 0;
  std::vector<double> grid;  // height * width, row-major
  int source_k = 0;
  int n_inputs = 0;

  double at(int h, int w) const { return grid[static_cast<size_t>(h) * width + w]; }
};

// Sum of |d(center channel-sum of extractor output)/d(input)| over the batch,
// normalized to unit mass. Throws ConfigError on an all-zero gradient.
using FeatureExtractor = std::function<ValueId(Tape&, ValueId)>;
ErfMap compute_erf(const FeatureExtractor& extractor, const std::vector<Tensor>& inputs,
                   int source_k = 0);
ErfMap compute_erf(const VanModel& model, const std::vector<Tensor>& inputs);

// n_inputs seeded random images of size hw x hw.
ErfMap compute_erf_random(const VanModel& model, int n_inputs, int hw, uint64_t seed);

// Smallest centered-square half-width enclosing at least `mass` of the map.
// Cells are unit squares; partial coverage counts proportionally, so the
// result is continuous (a uniform HxH map needs half-width H/2 for mass 1).
double erf_radius(const ErfMap& map, double mass = 0.95);

// Pearson correlation. Zero-variance series yield 0 and set *zero_variance.
double pearson_correlation(std::span<const double> a, std::span<const double> b,
                           bool* zero_variance = nullptr);

// Correlations are clamped into [-kCorrelationClamp, kCorrelationClamp]
// before any MI evaluation to keep -0.5*log(1-c^2) finite.
constexpr double kCorrelationClamp = 0.999999;

// -0.5 * ln(1 - c^2), nats. Requires |c| < 1.
double mutual_information(double c);

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major

  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  std::vector<double> column(int c) const;
};

// Sum over neurons of the clamped per-neuron correlation between the paired
// latents. Scores are (shape, texture, residual); the residual score is 0.
std::array<double, 3> factor_scores(const Matrix& shape_a, const Matrix& shape_b,
                                    const Matrix& texture_a, const Matrix& texture_b);

// softmax(scores) * N, computed with max-subtraction.
std::array<double, 3> dimensionality(const std::array<double, 3>& scores, int latent_dim);

struct ProbeReport {
  std::array<double, 3> scores{};           // shape, texture, residual
  std::array<double, 3> dimensionalities{};  // sums to latent_dim
  int latent_dim = 0;
  int shape_pairs = 0;
  int texture_pairs = 0;
};

ProbeReport run_probe(const Matrix& shape_a, const Matrix& shape_b, const Matrix& texture_a,
                      const Matrix& texture_b);

}  // namespace lska
