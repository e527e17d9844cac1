#pragma once

#include <cstdint>
#include <random>

#include "isomer/numerics/dense_array.hpp"

namespace isomer {

/// Portable seeded generator.
///
/// Draws come from std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. Real-valued draws are converted here rather than through
/// <random> distributions, which are implementation-defined:
///   uniform01  = (bits >> 11) * 2^-53, in [0, 1)
///   normal     = Box-Muller over two uniform01 draws (cosine branch only)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  DenseArray uniform_array(Shape shape, double lo, double hi);
  DenseArray normal_array(Shape shape, double stddev = 1.0);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace isomer
