#pragma once

#include <functional>

namespace lska {

struct TimingStats {
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
  double median_ms = 0.0;
  int reps = 0;
};

// Fixed warm-up runs, then `reps` timed runs, strictly serial.
TimingStats time_callable(const std::function<void()>& fn, int reps, int warmup = 5);

}  // namespace lska
