#include "isomer/verify/oracles.hpp"

#include <cmath>

namespace isomer::verify {

namespace {

constexpr double kEps = 1e-5;

DenseArray columns(const DenseArray& a, std::size_t begin, std::size_t count) {
  DenseArray out({a.rows(), count});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = a(i, begin + j);
  return out;
}

DenseArray plus(const DenseArray& a, const DenseArray& b) {
  DenseArray out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

DenseArray ffn(const DenseArray& y, blocks::ParamView p) {
  const DenseArray n = oracle_layernorm(y, p["ln2.gamma"], p["ln2.beta"]);
  DenseArray h = oracle_linear(n, p["ffn.w1"], p["ffn.b1"]);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = h[i] > 0.0 ? h[i] : 0.0;
  return plus(y, oracle_linear(h, p["ffn.w2"], p["ffn.b2"]));
}

}  // namespace

DenseArray oracle_attention(const DenseArray& q, const DenseArray& k, const DenseArray& v,
                            double scale) {
  const std::size_t m = q.rows(), p = k.rows(), d = q.cols(), dv = v.cols();
  DenseArray out({m, dv});
  std::vector<double> s(p);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < p; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += q(i, c) * k(j, c);
      s[j] = dot * scale;
      mx = std::max(mx, s[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      s[j] = std::exp(s[j] - mx);
      z += s[j];
    }
    for (std::size_t c = 0; c < dv; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < p; ++j) acc += s[j] / z * v(j, c);
      out(i, c) = acc;
    }
  }
  return out;
}

DenseArray oracle_linear(const DenseArray& x, const DenseArray& w, const DenseArray& b) {
  const std::size_t n = x.rows(), in = x.cols(), out_dim = w.cols();
  if (w.rows() != in || b.size() != out_dim) {
    throw DimensionError("oracle_linear: " + shape_to_string(x.shape()) + " x " +
                         shape_to_string(w.shape()) + " + " + shape_to_string(b.shape()));
  }
  DenseArray out({n, out_dim});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < out_dim; ++j) {
      double acc = b[j];
      for (std::size_t c = 0; c < in; ++c) acc += x(i, c) * w(c, j);
      out(i, j) = acc;
    }
  return out;
}

DenseArray oracle_layernorm(const DenseArray& x, const DenseArray& gamma, const DenseArray& beta) {
  const std::size_t n = x.rows(), c = x.cols();
  DenseArray out({n, c});
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += x(i, j);
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(c);
    const double inv = 1.0 / std::sqrt(var + kEps);
    for (std::size_t j = 0; j < c; ++j) out(i, j) = (x(i, j) - mean) * inv * gamma[j] + beta[j];
  }
  return out;
}

DenseArray oracle_multihead(const DenseArray& queries, const DenseArray& kv, blocks::ParamView p,
                            std::size_t heads) {
  const std::size_t c = queries.cols();
  const std::size_t dh = c / heads;
  const DenseArray q = oracle_linear(queries, p["wq"], p["bq"]);
  DenseArray no_bias({queries.cols()});
  const DenseArray k = oracle_linear(kv, p["wk"], no_bias);
  const DenseArray v = oracle_linear(kv, p["wv"], p["bv"]);
  DenseArray ctx({queries.rows(), c});
  for (std::size_t h = 0; h < heads; ++h) {
    const DenseArray o = oracle_attention(columns(q, h * dh, dh), columns(k, h * dh, dh),
                                          columns(v, h * dh, dh),
                                          1.0 / std::sqrt(static_cast<double>(dh)));
    for (std::size_t i = 0; i < o.rows(); ++i)
      for (std::size_t j = 0; j < dh; ++j) ctx(i, h * dh + j) = o(i, j);
  }
  return oracle_linear(ctx, p["wo"], p["bo"]);
}

DenseArray oracle_cst_as_attention(const DenseArray& x, blocks::ParamView p) {
  const std::size_t n = x.rows(), c = x.cols();
  const DenseArray& wg = p["cst.wg"];
  std::vector<double> g(n);
  double mx = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += x(i, j) * wg[j];
    g[i] = s;
    mx = std::max(mx, s);
  }
  double z = 0.0;
  for (auto& v : g) {
    v = std::exp(v - mx);
    z += v;
  }
  // Query-shared attention: row i of A is G for every i.
  DenseArray a({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = g[j] / z;
  DenseArray attended({n, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += a(i, j) * x(j, k);
      attended(i, k) = acc;
    }
  const DenseArray t1 = oracle_linear(attended, p["cst.w1"], p["cst.b1"]);
  DenseArray hidden = oracle_layernorm(t1, p["cst.ln.gamma"], p["cst.ln.beta"]);
  for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] = hidden[i] > 0.0 ? hidden[i] : 0.0;
  return plus(x, oracle_linear(hidden, p["cst.w2"], p["cst.b2"]));
}

DenseArray oracle_vanilla_block(const DenseArray& x, blocks::ParamView p,
                                const blocks::BlockConfig& cfg) {
  const DenseArray u = oracle_layernorm(x, p["ln1.gamma"], p["ln1.beta"]);
  const DenseArray y = plus(x, oracle_multihead(u, u, p.sub("attn."), cfg.heads));
  return ffn(y, p);
}

DenseArray oracle_branch(const DenseArray& queries, const DenseArray& merged, blocks::ParamView p,
                         const blocks::BlockConfig& cfg) {
  if (queries.rows() == 0) return DenseArray({0, queries.cols()});
  const DenseArray u = oracle_layernorm(queries, p["ln1.gamma"], p["ln1.beta"]);
  const DenseArray y = plus(queries, oracle_multihead(u, merged, p.sub("attn."), cfg.heads));
  return ffn(y, p);
}

}  // namespace isomer::verify
