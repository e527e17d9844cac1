#pragma once

#include <cstddef>
#include <span>

#include "isomer/numerics/dense_array.hpp"

// Dense kernels. Every kernel is a pure function of its inputs and reports
// its arithmetic to the thread-local FLOP counter (see flops.hpp).

namespace isomer {

inline constexpr double kLayerNormEps = 1e-5;

/// Worker threads used by matmul. Default 1. Accumulation order per output
/// element is identical for every thread count.
void set_num_threads(std::size_t n);
std::size_t num_threads();

/// c[i][j] = sum_k a[i][k] * b[k][j], accumulated from 0 in ascending k.
DenseArray matmul(const DenseArray& a, const DenseArray& b);
/// a^T * b without materializing the transpose of a.
DenseArray matmul_tn(const DenseArray& a, const DenseArray& b);
/// a * b^T without materializing the transpose of b.
DenseArray matmul_nt(const DenseArray& a, const DenseArray& b);

DenseArray transpose(const DenseArray& a);

DenseArray add(const DenseArray& a, const DenseArray& b);
DenseArray sub(const DenseArray& a, const DenseArray& b);
DenseArray mul(const DenseArray& a, const DenseArray& b);
DenseArray scale(const DenseArray& a, double s);
/// a += b in place (same shape).
void add_inplace(DenseArray& a, const DenseArray& b);

/// Adds a length-P vector to every row of an M x P array.
DenseArray add_row(const DenseArray& a, const DenseArray& row);
/// Multiplies row i of an M x P array by w[i].
DenseArray scale_rows(const DenseArray& a, std::span<const double> w);
/// Column sums of an M x P array (bias gradients). Shape {P}.
DenseArray sum_rows(const DenseArray& a);
double sum_all(const DenseArray& a);

/// x * w + b with x: M x in, w: in x out, b: out.
DenseArray linear(const DenseArray& x, const DenseArray& w, const DenseArray& b);

DenseArray relu(const DenseArray& x);
void relu_inplace(DenseArray& x);
DenseArray relu_backward(const DenseArray& x, const DenseArray& dy);
DenseArray sigmoid(const DenseArray& x);
/// dy * y * (1 - y) given y = sigmoid(x).
DenseArray sigmoid_backward(const DenseArray& y, const DenseArray& dy);

/// Softmax along `axis` with max subtraction.
DenseArray softmax(const DenseArray& x, std::size_t axis);
/// Vector-Jacobian product of softmax along `axis` given its output y.
DenseArray softmax_backward(const DenseArray& y, const DenseArray& dy, std::size_t axis);

struct LayerNormResult {
  DenseArray out;
  DenseArray normalized;  // (x - mean) * rstd, before the affine
  DenseArray rstd;        // one entry per slice
};

/// Normalizes every slice along `axis` to mean 0, variance 1 (biased
/// variance, eps = kLayerNormEps), then applies gamma/beta (length = dim(axis)).
DenseArray layernorm(const DenseArray& x, const DenseArray& gamma, const DenseArray& beta,
                     std::size_t axis);
LayerNormResult layernorm_forward(const DenseArray& x, const DenseArray& gamma,
                                  const DenseArray& beta, std::size_t axis);

struct LayerNormGrads {
  DenseArray dx;
  DenseArray dgamma;
  DenseArray dbeta;
};
LayerNormGrads layernorm_backward(const LayerNormResult& fwd, const DenseArray& gamma,
                                  const DenseArray& dy, std::size_t axis);

// Row gather/scatter on 2-D arrays. Free under the FLOP convention.
DenseArray gather_rows(const DenseArray& a, std::span<const std::size_t> idx);
void scatter_rows(DenseArray& dst, std::span<const std::size_t> idx, const DenseArray& src);
DenseArray slice_cols(const DenseArray& a, std::size_t begin, std::size_t count);
void assign_cols(DenseArray& dst, std::size_t begin, const DenseArray& src);

}  // namespace isomer
