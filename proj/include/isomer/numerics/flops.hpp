#pragma once

#include <cstdint>

// FLOP accounting shared by the instrumented numerics layer and the analytic
// cost model.
//
// Convention: one multiply-add is 2 FLOPs. Elementwise add, subtract,
// multiply, scale and ReLU are 1 FLOP per element. Transcendental-bearing
// kernels use fixed per-element costs:
//
//   softmax     4 per element   (shift, exp, accumulate, divide)
//   sigmoid     4 per element   (negate, exp, add, divide)
//   layernorm   7 per element   (mean, center, square, accumulate,
//                                normalize, gamma, beta)
//             + 2 per slice     (eps add, rsqrt)
//
// Data movement (transpose, gather, scatter, upsample copies) is free.

namespace isomer::flops {

inline constexpr std::uint64_t kPerMac = 2;
inline constexpr std::uint64_t kPerElementwise = 1;
inline constexpr std::uint64_t kPerSoftmaxElement = 4;
inline constexpr std::uint64_t kPerSigmoidElement = 4;
inline constexpr std::uint64_t kPerLayerNormElement = 7;
inline constexpr std::uint64_t kPerLayerNormSlice = 2;

/// Adds `n` to the calling thread's counter.
void count(std::uint64_t n);
std::uint64_t current();
void reset();

/// Measures the FLOPs issued on this thread during its lifetime.
class Scope {
 public:
  Scope() : start_(current()) {}
  std::uint64_t elapsed() const { return current() - start_; }

 private:
  std::uint64_t start_;
};

}  // namespace isomer::flops
