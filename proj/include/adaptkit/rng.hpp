#pragma once

#include <cstdint>
#include <random>

#include "adaptkit/tensor.hpp"

namespace adaptkit {

// Seeded generator used for every stochastic choice (initialization, data
// generation, batch sampling). mt19937_64 output is fixed by the standard;
// the distributions below are implemented here so results do not depend on
// the standard library's distribution algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  double normal();
  // Normal(0, std) resampled until within ±2 std.
  double truncated_normal(double std);

  // Fresh generator whose seed is derived from this one and a stream label.
  Rng fork(std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
};

// Tensor of truncated-normal draws, rounded to binary32 so on-disk round
// trips are exact.
Tensor truncated_normal_tensor(Shape shape, double std, Rng& rng);

}  // namespace adaptkit
