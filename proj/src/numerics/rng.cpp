#include "isomer/numerics/rng.hpp"

#include <cmath>
#include <numbers>

namespace isomer {

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  // Rejection sampling avoids modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

DenseArray Rng::uniform_array(Shape shape, double lo, double hi) {
  DenseArray a(std::move(shape));
  for (double& v : a.data()) v = uniform(lo, hi);
  return a;
}

DenseArray Rng::normal_array(Shape shape, double stddev) {
  DenseArray a(std::move(shape));
  for (double& v : a.data()) v = stddev * normal();
  return a;
}

}  // namespace isomer
