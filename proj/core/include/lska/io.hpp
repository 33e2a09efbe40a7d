#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lska/analysis.hpp"

namespace lska {

// One line of the sweep/cost CSV. Wall-time fields stay empty unless
// benchmarking was requested.
struct SweepRow {
  std::string variant;
  int k = 0;
  int d = 0;
  std::string channels_or_capacity;
  long long params = 0;
  long long macs = 0;
  double gflops = 0.0;
  std::optional<double> wall_ms_mean;
  std::optional<double> wall_ms_stddev;
  std::optional<int> reps;
  uint64_t seed = 0;
};

// %.6g
std::string format_double(double v);

// Fixed header, rows sorted by (variant, k), LF line endings.
std::string sweep_csv(std::vector<SweepRow> rows);

std::string erf_values_csv(const ErfMap& map);
std::string erf_radius_csv(const ErfMap& map, uint64_t seed,
                           const std::vector<double>& masses = {0.5, 0.75, 0.9, 0.95, 0.99});

// Binary P5, maxval 255, cells scaled linearly so the maximum is 255.
std::string pgm_bytes(const ErfMap& map);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Numeric CSV (no header) into a dense matrix; all rows must agree on width.
Matrix read_csv_matrix(const std::string& path);
std::string matrix_csv(const Matrix& m);

}  // namespace lska
