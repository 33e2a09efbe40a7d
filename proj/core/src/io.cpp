#include "lska/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

namespace lska {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

namespace {

std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string sweep_csv(std::vector<SweepRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.variant, a.k) < std::tie(b.variant, b.k);
  });
  std::string out =
      "variant,k,d,channels_or_capacity,params,macs,gflops,wall_ms_mean,wall_ms_stddev,reps,"
      "seed\n";
  for (const SweepRow& r : rows) {
    out += r.variant;
    out += ',' + std::to_string(r.k);
    out += ',' + std::to_string(r.d);
    out += ',' + r.channels_or_capacity;
    out += ',' + std::to_string(r.params);
    out += ',' + std::to_string(r.macs);
    out += ',' + format_double(r.gflops);
    out += ',';
    if (r.wall_ms_mean) out += format_double(*r.wall_ms_mean);
    out += ',';
    if (r.wall_ms_stddev) out += format_double(*r.wall_ms_stddev);
    out += ',';
    if (r.reps) out += std::to_string(*r.reps);
    out += ',' + std::to_string(r.seed);
    out += '\n';
  }
  return out;
}

std::string erf_values_csv(const ErfMap& map) {
  Matrix m;
  m.rows = map.height;
  m.cols = map.width;
  m.data = map.grid;
  return matrix_csv(m);
}

std::string erf_radius_csv(const ErfMap& map, uint64_t seed, const std::vector<double>& masses) {
  std::string out = "mass,radius,k,n_inputs,seed\n";
  for (double mass : masses) {
    out += format_double(mass);
    out += ',' + format_double(erf_radius(map, mass));
    out += ',' + std::to_string(map.source_k);
    out += ',' + std::to_string(map.n_inputs);
    out += ',' + std::to_string(seed);
    out += '\n';
  }
  return out;
}

std::string pgm_bytes(const ErfMap& map) {
  double peak = 0.0;
  for (double v : map.grid) peak = std::max(peak, v);
  if (peak <= 0.0) throw IoError("pgm: map has no mass");
  std::string out =
      "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n";
  out.reserve(out.size() + map.grid.size());
  for (double v : map.grid) {
    const int level = static_cast<int>(std::lround(v / peak * 255.0));
    out.push_back(static_cast<char>(std::clamp(level, 0, 255)));
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  f.flush();
  if (!f) {
    f.close();
    std::remove(path.c_str());
    throw IoError("write failed: " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  if (!f && !f.eof()) throw IoError("read failed: " + path);
  return ss.str();
}

Matrix read_csv_matrix(const std::string& path) {
  const std::string text = read_file(path);
  Matrix m;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && (cell[used] == ' ' || cell[used] == '\t')) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw IoError(path + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
      }
    }
    if (row.empty()) {
      throw IoError(path + ":" + std::to_string(line_no) + ": empty row");
    }
    if (m.cols == 0) {
      m.cols = static_cast<int>(row.size());
    } else if (static_cast<int>(row.size()) != m.cols) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(m.cols) + " columns, got " + std::to_string(row.size()));
    }
    m.data.insert(m.data.end(), row.begin(), row.end());
    ++m.rows;
  }
  if (m.rows == 0) throw IoError(path + ": no data rows");
  return m;
}

std::string matrix_csv(const Matrix& m) {
  std::string out;
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      if (c) out += ',';
      out += format_exact(m.at(r, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace lska
