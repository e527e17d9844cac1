#include "isomer/numerics/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "isomer/numerics/flops.hpp"

namespace isomer {

namespace {

std::atomic<std::size_t> g_threads{1};

void require_rank2(const DenseArray& a, const char* op) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 array, got " +
                         shape_to_string(a.shape()));
  }
}

void require_same_shape(const DenseArray& a, const DenseArray& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

// Register tile: MR rows x NR columns of C held in vector registers across
// a K block. Each lane accumulates its own output element in ascending k, so
// results match the scalar definition bit for bit.
constexpr std::size_t kMr = 6;
constexpr std::size_t kNr = 16;
constexpr std::size_t kKc = 256;
constexpr std::size_t kNc = 512;

typedef double Vec8 __attribute__((vector_size(64), aligned(8)));

inline Vec8 load8(const double* p) {
  Vec8 v;
  __builtin_memcpy(&v, p, sizeof v);
  return v;
}

inline void store8(double* p, Vec8 v) { __builtin_memcpy(p, &v, sizeof v); }

inline void micro_full(const double* a, std::size_t lda, const double* b, std::size_t ldb,
                       double* c, std::size_t ldc, std::size_t kc) {
  Vec8 acc[kMr][2];
  for (std::size_t r = 0; r < kMr; ++r) {
    acc[r][0] = load8(c + r * ldc);
    acc[r][1] = load8(c + r * ldc + 8);
  }
  for (std::size_t k = 0; k < kc; ++k) {
    const Vec8 b0 = load8(b + k * ldb);
    const Vec8 b1 = load8(b + k * ldb + 8);
    for (std::size_t r = 0; r < kMr; ++r) {
      const double av = a[r * lda + k];
      acc[r][0] += av * b0;
      acc[r][1] += av * b1;
    }
  }
  for (std::size_t r = 0; r < kMr; ++r) {
    store8(c + r * ldc, acc[r][0]);
    store8(c + r * ldc + 8, acc[r][1]);
  }
}

inline void micro_edge(const double* a, std::size_t lda, const double* b, std::size_t ldb,
                       double* c, std::size_t ldc, std::size_t kc, std::size_t mr,
                       std::size_t nr) {
  for (std::size_t r = 0; r < mr; ++r) {
    double* crow = c + r * ldc;
    for (std::size_t k = 0; k < kc; ++k) {
      const double av = a[r * lda + k];
      const double* brow = b + k * ldb;
      for (std::size_t j = 0; j < nr; ++j) crow[j] += av * brow[j];
    }
  }
}

// Rows [row_begin, row_end) of C = A * B. C rows must be zero on entry.
void gemm_rows(const double* a, const double* b, double* c, std::size_t row_begin,
               std::size_t row_end, std::size_t kdim, std::size_t p) {
  for (std::size_t k0 = 0; k0 < kdim; k0 += kKc) {
    const std::size_t kc = std::min(kKc, kdim - k0);
    for (std::size_t j0 = 0; j0 < p; j0 += kNc) {
      const std::size_t nc = std::min(kNc, p - j0);
      for (std::size_t i = row_begin; i < row_end; i += kMr) {
        const std::size_t mr = std::min(kMr, row_end - i);
        for (std::size_t j = j0; j < j0 + nc; j += kNr) {
          const std::size_t nr = std::min(kNr, j0 + nc - j);
          const double* ap = a + i * kdim + k0;
          const double* bp = b + k0 * p + j;
          double* cp = c + i * p + j;
          if (mr == kMr && nr == kNr) {
            micro_full(ap, kdim, bp, p, cp, p, kc);
          } else {
            micro_edge(ap, kdim, bp, p, cp, p, kc, mr, nr);
          }
        }
      }
    }
  }
}

struct SliceGeometry {
  std::size_t outer;
  std::size_t n;
  std::size_t inner;
};

SliceGeometry slice_geometry(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " invalid for shape " + shape_to_string(shape));
  }
  SliceGeometry g{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) g.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) g.inner *= shape[i];
  return g;
}

template <typename F>
DenseArray map_elements(const DenseArray& x, F f) {
  DenseArray y(x.shape());
  auto src = x.data();
  auto dst = y.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return y;
}

}  // namespace

void set_num_threads(std::size_t n) { g_threads = std::max<std::size_t>(1, n); }
std::size_t num_threads() { return g_threads; }

DenseArray matmul(const DenseArray& a, const DenseArray& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), kdim = a.cols(), p = b.cols();
  if (b.rows() != kdim) {
    throw DimensionError("matmul: inner dimensions differ " + shape_to_string(a.shape()) +
                         " * " + shape_to_string(b.shape()));
  }
  DenseArray c({m, p});
  flops::count(flops::kPerMac * m * kdim * p);
  if (m == 0 || p == 0 || kdim == 0) return c;

  const double* ap = a.data().data();
  const double* bp = b.data().data();
  double* cp = c.data().data();
  const std::size_t threads = std::min(num_threads(), (m + kMr - 1) / kMr);
  if (threads <= 1) {
    gemm_rows(ap, bp, cp, 0, m, kdim, p);
    return c;
  }
  // Row bands rounded to the register tile so tiling matches the serial path.
  const std::size_t tiles = (m + kMr - 1) / kMr;
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(m, (tiles * t / threads) * kMr);
    const std::size_t end = std::min(m, (tiles * (t + 1) / threads) * kMr);
    if (begin >= end) continue;
    workers.emplace_back([=] { gemm_rows(ap, bp, cp, begin, end, kdim, p); });
  }
  return c;
}

DenseArray matmul_tn(const DenseArray& a, const DenseArray& b) { return matmul(transpose(a), b); }
DenseArray matmul_nt(const DenseArray& a, const DenseArray& b) { return matmul(a, transpose(b)); }

DenseArray transpose(const DenseArray& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  DenseArray t({n, m});
  constexpr std::size_t kBlock = 32;
  for (std::size_t i0 = 0; i0 < m; i0 += kBlock)
    for (std::size_t j0 = 0; j0 < n; j0 += kBlock)
      for (std::size_t i = i0; i < std::min(m, i0 + kBlock); ++i)
        for (std::size_t j = j0; j < std::min(n, j0 + kBlock); ++j) t(j, i) = a(i, j);
  return t;
}

DenseArray add(const DenseArray& a, const DenseArray& b) {
  require_same_shape(a, b, "add");
  DenseArray c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  flops::count(a.size());
  return c;
}

DenseArray sub(const DenseArray& a, const DenseArray& b) {
  require_same_shape(a, b, "sub");
  DenseArray c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
  flops::count(a.size());
  return c;
}

DenseArray mul(const DenseArray& a, const DenseArray& b) {
  require_same_shape(a, b, "mul");
  DenseArray c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] * b[i];
  flops::count(a.size());
  return c;
}

DenseArray scale(const DenseArray& a, double s) {
  flops::count(a.size());
  return map_elements(a, [s](double v) { return v * s; });
}

void add_inplace(DenseArray& a, const DenseArray& b) {
  require_same_shape(a, b, "add_inplace");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  flops::count(a.size());
}

DenseArray add_row(const DenseArray& a, const DenseArray& row) {
  require_rank2(a, "add_row");
  if (row.size() != a.cols()) {
    throw DimensionError("add_row: row length " + std::to_string(row.size()) + " vs " +
                         std::to_string(a.cols()) + " columns");
  }
  DenseArray c(a.shape());
  const std::size_t m = a.rows(), n = a.cols();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = a(i, j) + row[j];
  flops::count(m * n);
  return c;
}

DenseArray scale_rows(const DenseArray& a, std::span<const double> w) {
  require_rank2(a, "scale_rows");
  if (w.size() != a.rows()) throw DimensionError("scale_rows: weight count != rows");
  DenseArray c(a.shape());
  const std::size_t m = a.rows(), n = a.cols();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = a(i, j) * w[i];
  flops::count(m * n);
  return c;
}

DenseArray sum_rows(const DenseArray& a) {
  require_rank2(a, "sum_rows");
  DenseArray s({a.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s[j] += a(i, j);
  flops::count(a.size());
  return s;
}

double sum_all(const DenseArray& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  flops::count(a.size());
  return s;
}

DenseArray linear(const DenseArray& x, const DenseArray& w, const DenseArray& b) {
  DenseArray y = matmul(x, w);
  if (b.size() != y.cols()) {
    throw DimensionError("linear: bias length " + std::to_string(b.size()) + " vs " +
                         std::to_string(y.cols()) + " columns");
  }
  // Bias added in place: same values as add_row without another allocation.
  const std::size_t m = y.rows(), n = y.cols();
  double* yp = y.data().data();
  const double* bp = b.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) yp[i * n + j] += bp[j];
  flops::count(m * n);
  return y;
}

DenseArray relu(const DenseArray& x) {
  flops::count(x.size());
  return map_elements(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

void relu_inplace(DenseArray& x) {
  flops::count(x.size());
  for (double& v : x.data()) v = v > 0.0 ? v : 0.0;
}

DenseArray relu_backward(const DenseArray& x, const DenseArray& dy) {
  require_same_shape(x, dy, "relu_backward");
  DenseArray dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
  flops::count(x.size());
  return dx;
}

DenseArray sigmoid(const DenseArray& x) {
  flops::count(flops::kPerSigmoidElement * x.size());
  return map_elements(x, [](double v) {
    // Branch on sign so exp never overflows.
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

DenseArray sigmoid_backward(const DenseArray& y, const DenseArray& dy) {
  require_same_shape(y, dy, "sigmoid_backward");
  DenseArray dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * y[i] * (1.0 - y[i]);
  flops::count(3 * y.size());
  return dx;
}

DenseArray softmax(const DenseArray& x, std::size_t axis) {
  const auto g = slice_geometry(x.shape(), axis, "softmax");
  DenseArray y(x.shape());
  auto src = x.data();
  auto dst = y.data();
  if (g.inner == 1) {
    for (std::size_t o = 0; o < g.outer; ++o) {
      const double* in = src.data() + o * g.n;
      double* out = dst.data() + o * g.n;
      double mx = -INFINITY;
      for (std::size_t t = 0; t < g.n; ++t) mx = std::max(mx, in[t]);
      double total = 0.0;
      for (std::size_t t = 0; t < g.n; ++t) {
        out[t] = std::exp(in[t] - mx);
        total += out[t];
      }
      const double inv = 1.0 / total;
      for (std::size_t t = 0; t < g.n; ++t) out[t] *= inv;
    }
  } else {
    // Strided slices: sweep whole rows so memory is read contiguously. Each
    // slice still accumulates in ascending t, so results match the row case.
    std::vector<double> mx(g.inner), total(g.inner);
    for (std::size_t o = 0; o < g.outer; ++o) {
      const double* in = src.data() + o * g.n * g.inner;
      double* out = dst.data() + o * g.n * g.inner;
      std::fill(mx.begin(), mx.end(), -INFINITY);
      std::fill(total.begin(), total.end(), 0.0);
      for (std::size_t t = 0; t < g.n; ++t)
        for (std::size_t j = 0; j < g.inner; ++j) mx[j] = std::max(mx[j], in[t * g.inner + j]);
      for (std::size_t t = 0; t < g.n; ++t)
        for (std::size_t j = 0; j < g.inner; ++j) {
          const double e = std::exp(in[t * g.inner + j] - mx[j]);
          out[t * g.inner + j] = e;
          total[j] += e;
        }
      for (std::size_t j = 0; j < g.inner; ++j) total[j] = 1.0 / total[j];
      for (std::size_t t = 0; t < g.n; ++t)
        for (std::size_t j = 0; j < g.inner; ++j) out[t * g.inner + j] *= total[j];
    }
  }
  flops::count(flops::kPerSoftmaxElement * x.size());
  return y;
}

DenseArray softmax_backward(const DenseArray& y, const DenseArray& dy, std::size_t axis) {
  require_same_shape(y, dy, "softmax_backward");
  const auto g = slice_geometry(y.shape(), axis, "softmax_backward");
  DenseArray dx(y.shape());
  auto ys = y.data();
  auto ds = dy.data();
  auto out = dx.data();
  for (std::size_t o = 0; o < g.outer; ++o) {
    for (std::size_t in = 0; in < g.inner; ++in) {
      const std::size_t base = o * g.n * g.inner + in;
      double dot = 0.0;
      for (std::size_t t = 0; t < g.n; ++t) {
        const std::size_t k = base + t * g.inner;
        dot += ys[k] * ds[k];
      }
      for (std::size_t t = 0; t < g.n; ++t) {
        const std::size_t k = base + t * g.inner;
        out[k] = ys[k] * (ds[k] - dot);
      }
    }
  }
  flops::count(4 * y.size());
  return dx;
}

LayerNormResult layernorm_forward(const DenseArray& x, const DenseArray& gamma,
                                  const DenseArray& beta, std::size_t axis) {
  const auto g = slice_geometry(x.shape(), axis, "layernorm");
  if (gamma.size() != g.n || beta.size() != g.n) {
    throw DimensionError("layernorm: gamma/beta length must equal " + std::to_string(g.n));
  }
  LayerNormResult r{DenseArray(x.shape()), DenseArray(x.shape()),
                    DenseArray({g.outer * g.inner})};
  auto src = x.data();
  auto out = r.out.data();
  auto xhat = r.normalized.data();
  const double inv_n = 1.0 / static_cast<double>(g.n);
  for (std::size_t o = 0; o < g.outer; ++o) {
    for (std::size_t in = 0; in < g.inner; ++in) {
      const std::size_t base = o * g.n * g.inner + in;
      // Statistics are taken relative to the first element, so a constant
      // slice has exactly zero deviations and maps to beta.
      const double pivot = src[base];
      double mean = 0.0;
      for (std::size_t t = 0; t < g.n; ++t) mean += src[base + t * g.inner] - pivot;
      mean *= inv_n;
      double var = 0.0;
      for (std::size_t t = 0; t < g.n; ++t) {
        const double d = (src[base + t * g.inner] - pivot) - mean;
        var += d * d;
      }
      var *= inv_n;
      const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
      r.rstd[o * g.inner + in] = rstd;
      for (std::size_t t = 0; t < g.n; ++t) {
        const std::size_t k = base + t * g.inner;
        xhat[k] = ((src[k] - pivot) - mean) * rstd;
        out[k] = xhat[k] * gamma[t] + beta[t];
      }
    }
  }
  flops::count(flops::kPerLayerNormElement * x.size() +
               flops::kPerLayerNormSlice * g.outer * g.inner);
  return r;
}

DenseArray layernorm(const DenseArray& x, const DenseArray& gamma, const DenseArray& beta,
                     std::size_t axis) {
  return layernorm_forward(x, gamma, beta, axis).out;
}

LayerNormGrads layernorm_backward(const LayerNormResult& fwd, const DenseArray& gamma,
                                  const DenseArray& dy, std::size_t axis) {
  require_same_shape(fwd.normalized, dy, "layernorm_backward");
  const auto g = slice_geometry(dy.shape(), axis, "layernorm_backward");
  LayerNormGrads grads{DenseArray(dy.shape()), DenseArray({g.n}), DenseArray({g.n})};
  auto xhat = fwd.normalized.data();
  auto d = dy.data();
  auto dx = grads.dx.data();
  const double inv_n = 1.0 / static_cast<double>(g.n);
  for (std::size_t o = 0; o < g.outer; ++o) {
    for (std::size_t in = 0; in < g.inner; ++in) {
      const std::size_t base = o * g.n * g.inner + in;
      const double rstd = fwd.rstd[o * g.inner + in];
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (std::size_t t = 0; t < g.n; ++t) {
        const std::size_t k = base + t * g.inner;
        const double dxh = d[k] * gamma[t];
        sum_dxhat += dxh;
        sum_dxhat_xhat += dxh * xhat[k];
        grads.dgamma[t] += d[k] * xhat[k];
        grads.dbeta[t] += d[k];
      }
      for (std::size_t t = 0; t < g.n; ++t) {
        const std::size_t k = base + t * g.inner;
        const double dxh = d[k] * gamma[t];
        dx[k] = rstd * (dxh - inv_n * sum_dxhat - xhat[k] * inv_n * sum_dxhat_xhat);
      }
    }
  }
  flops::count(12 * dy.size());
  return grads;
}

DenseArray gather_rows(const DenseArray& a, std::span<const std::size_t> idx) {
  require_rank2(a, "gather_rows");
  const std::size_t n = a.cols();
  DenseArray out({idx.size(), n});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= a.rows()) throw DimensionError("gather_rows: index out of range");
    std::copy_n(a.row(idx[r]).begin(), n, out.row(r).begin());
  }
  return out;
}

void scatter_rows(DenseArray& dst, std::span<const std::size_t> idx, const DenseArray& src) {
  require_rank2(dst, "scatter_rows");
  if (src.rank() != 2 || src.rows() != idx.size() ||
      (idx.size() > 0 && src.cols() != dst.cols())) {
    throw DimensionError("scatter_rows: source " + shape_to_string(src.shape()) + " vs " +
                         std::to_string(idx.size()) + " indexes");
  }
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= dst.rows()) throw DimensionError("scatter_rows: index out of range");
    std::copy_n(src.row(r).begin(), dst.cols(), dst.row(idx[r]).begin());
  }
}

DenseArray slice_cols(const DenseArray& a, std::size_t begin, std::size_t count) {
  require_rank2(a, "slice_cols");
  if (begin + count > a.cols()) throw DimensionError("slice_cols: range exceeds columns");
  DenseArray out({a.rows(), count});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = a(i, begin + j);
  return out;
}

void assign_cols(DenseArray& dst, std::size_t begin, const DenseArray& src) {
  require_rank2(dst, "assign_cols");
  require_rank2(src, "assign_cols");
  if (src.rows() != dst.rows() || begin + src.cols() > dst.cols()) {
    throw DimensionError("assign_cols: block does not fit");
  }
  for (std::size_t i = 0; i < src.rows(); ++i)
    for (std::size_t j = 0; j < src.cols(); ++j) dst(i, begin + j) = src(i, j);
}

}  // namespace isomer
