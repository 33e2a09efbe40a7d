#pragma once

#include <cstdint>
#include <random>

#include "lska/tensor.hpp"

namespace lska {

// mt19937_64 with a fixed uniform mapping so streams are identical across
// standard libraries (std::uniform_real_distribution is not portable).
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1) with 53-bit resolution
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // polar Box-Muller
  double normal();

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

Tensor random_uniform(Dims dims, Rng& rng, double lo = -1.0, double hi = 1.0);

}  // namespace lska
