#include "lska/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lska/rng.hpp"

namespace lska {

ErfMap compute_erf(const FeatureExtractor& extractor, const std::vector<Tensor>& inputs,
                   int source_k) {
  if (inputs.empty()) throw ConfigError("erf: need at least one input");
  const Dims dims = inputs.front().dims();
  ErfMap map;
  map.height = dims.h;
  map.width = dims.w;
  map.grid.assign(static_cast<size_t>(dims.h) * dims.w, 0.0);
  map.source_k = source_k;

  for (const Tensor& input : inputs) {
    if (!(input.dims() == dims)) {
      throw ShapeError("erf: input dims " + input.dims().str() + " vs " + dims.str());
    }
    Tape tape;
    const ValueId in = tape.leaf(input);
    const ValueId out = extractor(tape, in);
    const Tensor& feat = tape.value(out);
    const auto [n, c, fh, fw] = feat.dims();
    Tensor upstream(feat.dims());
    for (int ni = 0; ni < n; ++ni) {
      for (int ci = 0; ci < c; ++ci) upstream.at(ni, ci, fh / 2, fw / 2) = 1.0;
    }
    tape.backward(out, upstream, /*with_param_grads=*/false);
    const Tensor& g = tape.grad(in);
    for (int ni = 0; ni < dims.n; ++ni) {
      for (int ci = 0; ci < dims.c; ++ci) {
        for (int y = 0; y < dims.h; ++y) {
          for (int x = 0; x < dims.w; ++x) {
            map.grid[static_cast<size_t>(y) * dims.w + x] += std::abs(g.at(ni, ci, y, x));
          }
        }
      }
    }
    map.n_inputs += dims.n;
  }

  const double total = std::accumulate(map.grid.begin(), map.grid.end(), 0.0);
  if (total <= 0.0) throw ConfigError("erf: gradient mass is zero");
  for (double& v : map.grid) v /= total;
  return map;
}

ErfMap compute_erf(const VanModel& model, const std::vector<Tensor>& inputs) {
  FeatureExtractor extractor = [&model](Tape& tape, ValueId in) {
    return model.features(tape, in);
  };
  return compute_erf(extractor, inputs, model.config.spec.k);
}

ErfMap compute_erf_random(const VanModel& model, int n_inputs, int hw, uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> inputs;
  inputs.reserve(static_cast<size_t>(n_inputs));
  for (int i = 0; i < n_inputs; ++i) {
    inputs.push_back(random_uniform(Dims{1, 3, hw, hw}, rng));
  }
  return compute_erf(model, inputs);
}

double erf_radius(const ErfMap& map, double mass) {
  if (map.grid.empty()) throw ConfigError("erf_radius: empty map");
  if (mass <= 0.0 || mass > 1.0) throw ConfigError("erf_radius: mass must be in (0, 1]");
  const double cy = (map.height - 1) / 2.0;
  const double cx = (map.width - 1) / 2.0;
  // Cells are unit squares centered on their integer coordinates; a cell that
  // is only partially covered by the window contributes proportionally.  That
  // makes enclosed(r) continuous and strictly increasing wherever mass sits,
  // so the radius resolves sub-cell differences instead of snapping to shells.
  const auto overlap = [](double cell_center, double window_center, double r) {
    const double lo = std::max(cell_center - 0.5, window_center - r);
    const double hi = std::min(cell_center + 0.5, window_center + r);
    return std::max(0.0, hi - lo);
  };
  const auto enclosed = [&](double r) {
    double acc = 0.0;
    for (int y = 0; y < map.height; ++y) {
      const double dy = overlap(y, cy, r);
      if (dy == 0.0) continue;
      for (int x = 0; x < map.width; ++x) {
        const double v = map.at(y, x);
        if (v != 0.0) acc += v * dy * overlap(x, cx, r);
      }
    }
    return acc;
  };
  const double r_max = std::max(map.height, map.width) / 2.0;
  const double total = enclosed(r_max);
  const double target = mass * total;
  if (enclosed(r_max) < target) return r_max;
  double lo = 0.0, hi = r_max;
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (enclosed(mid) >= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b,
                           bool* zero_variance) {
  if (a.size() != b.size()) {
    throw ShapeError("pearson: series lengths " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  if (zero_variance) *zero_variance = false;
  const size_t n = a.size();
  if (n < 2) {
    if (zero_variance) *zero_variance = true;
    return 0.0;
  }
  double mean_a = 0.0, mean_b = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) {
    if (zero_variance) *zero_variance = true;
    return 0.0;
  }
  return cov / std::sqrt(var_a * var_b);
}

double mutual_information(double c) {
  if (!(std::abs(c) < 1.0)) {
    throw ConfigError("mutual_information: |c| must be < 1, got " + std::to_string(c));
  }
  return -0.5 * std::log(1.0 - c * c);
}

std::vector<double> Matrix::column(int c) const {
  std::vector<double> out(static_cast<size_t>(rows));
  for (int r = 0; r < rows; ++r) out[static_cast<size_t>(r)] = at(r, c);
  return out;
}

namespace {

double paired_score(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ShapeError("probe: paired latents must match, got " + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols));
  }
  double score = 0.0;
  for (int j = 0; j < a.cols; ++j) {
    const std::vector<double> ca = a.column(j);
    const std::vector<double> cb = b.column(j);
    double c = pearson_correlation(ca, cb);
    c = std::clamp(c, -kCorrelationClamp, kCorrelationClamp);
    score += c;
  }
  return score;
}

}  // namespace

std::array<double, 3> factor_scores(const Matrix& shape_a, const Matrix& shape_b,
                                    const Matrix& texture_a, const Matrix& texture_b) {
  if (shape_a.cols != texture_a.cols) {
    throw ShapeError("probe: latent dims differ, shape " + std::to_string(shape_a.cols) +
                     " vs texture " + std::to_string(texture_a.cols));
  }
  return {paired_score(shape_a, shape_b), paired_score(texture_a, texture_b), 0.0};
}

std::array<double, 3> dimensionality(const std::array<double, 3>& scores, int latent_dim) {
  const double top = std::max({scores[0], scores[1], scores[2]});
  std::array<double, 3> ex{};
  double denom = 0.0;
  for (int i = 0; i < 3; ++i) {
    ex[static_cast<size_t>(i)] = std::exp(scores[static_cast<size_t>(i)] - top);
    denom += ex[static_cast<size_t>(i)];
  }
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i) {
    out[static_cast<size_t>(i)] = ex[static_cast<size_t>(i)] / denom * latent_dim;
  }
  return out;
}

ProbeReport run_probe(const Matrix& shape_a, const Matrix& shape_b, const Matrix& texture_a,
                      const Matrix& texture_b) {
  ProbeReport report;
  report.scores = factor_scores(shape_a, shape_b, texture_a, texture_b);
  report.latent_dim = shape_a.cols;
  report.shape_pairs = shape_a.rows;
  report.texture_pairs = texture_a.rows;
  report.dimensionalities = dimensionality(report.scores, report.latent_dim);
  return report;
}

}  // namespace lska
