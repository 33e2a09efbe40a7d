#include "lska/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace lska {

TimingStats time_callable(const std::function<void()>& fn, int reps, int warmup) {
  if (reps < 1) throw std::invalid_argument("time_callable: reps must be >= 1");
  for (int i = 0; i < warmup; ++i) fn();

  std::vector<double> samples(static_cast<size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    samples[static_cast<size_t>(i)] =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
  }

  TimingStats stats;
  stats.reps = reps;
  double sum = 0.0;
  for (double s : samples) sum += s;
  stats.mean_ms = sum / reps;
  double sq = 0.0;
  for (double s : samples) sq += (s - stats.mean_ms) * (s - stats.mean_ms);
  stats.stddev_ms = reps > 1 ? std::sqrt(sq / (reps - 1)) : 0.0;

  std::sort(samples.begin(), samples.end());
  const size_t mid = samples.size() / 2;
  stats.median_ms =
      samples.size() % 2 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
  return stats;
}

}  // namespace lska
