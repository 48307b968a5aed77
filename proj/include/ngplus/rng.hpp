#pragma once

#include <cstdint>
#include <random>

#include "ngplus/linalg.hpp"

namespace ngplus {

/// Named substreams of a run seed. Each stream gets its own engine so that,
/// e.g., changing the sketch seed never perturbs data generation.
enum class Stream : std::uint64_t {
  Data = 0x1000,
  Init = 0x2000,
  Shuffle = 0x3000,
  Sketch = 0x4000,
  Study = 0x5000,
  Online = 0x6000,
  Curvature = 0x7000,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    engine_.seed(seq);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  /// Uniform integer in [0, n).
  Index index(Index n) { return std::uniform_int_distribution<Index>(0, n - 1)(engine_); }

  Mat gaussian(Index rows, Index cols) {
    Mat m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  Vec gaussian(Index n) { return gaussian(n, 1).col(0); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace ngplus
