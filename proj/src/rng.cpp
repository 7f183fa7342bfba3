#include "adaptkit/rng.hpp"

#include <cmath>
#include <numbers>

namespace adaptkit {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::size_t Rng::below(std::size_t n) {
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return static_cast<std::size_t>(v % n);
}

double Rng::normal() {
  // Box-Muller, one value per call.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::truncated_normal(double std) {
  for (;;) {
    const double z = normal();
    if (std::abs(z) <= 2.0) return z * std;
  }
}

Rng Rng::fork(std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(engine_()), static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 e(seq);
  Rng out(0);
  out.engine_ = e;
  return out;
}

Tensor truncated_normal_tensor(Shape shape, double std, Rng& rng) {
  Tensor t(std::move(shape), 0.0);
  for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(rng.truncated_normal(std)));
  return t;
}

}  // namespace adaptkit
