#include "isomer/blocks/attention.hpp"

#include <cmath>

#include "isomer/blocks/config.hpp"
#include "isomer/numerics/ops.hpp"

namespace isomer::blocks {

namespace {

void check_heads(std::size_t channels, std::size_t heads) {
  if (heads == 0 || channels % heads != 0) {
    throw ConfigError("attention: " + std::to_string(channels) + " channels not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

}  // namespace

DenseArray attention_forward(const DenseArray& queries, const DenseArray& kv_source, ParamView p,
                             std::size_t heads, AttentionCache* cache) {
  if (queries.rank() != 2 || kv_source.rank() != 2 || queries.cols() != kv_source.cols()) {
    throw DimensionError("attention: queries " + shape_to_string(queries.shape()) +
                         " and keys " + shape_to_string(kv_source.shape()) + " disagree");
  }
  const std::size_t m = queries.rows();
  const std::size_t c = queries.cols();
  check_heads(c, heads);
  const std::size_t dh = c / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));

  DenseArray q = linear(queries, p["wq"], p["bq"]);
  // No key bias: it shifts each score row by a constant, which softmax cancels.
  DenseArray k = matmul(kv_source, p["wk"]);
  DenseArray v = linear(kv_source, p["wv"], p["bv"]);

  DenseArray context({m, c});
  std::vector<DenseArray> probs;
  if (cache) probs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const DenseArray qh = heads == 1 ? q : slice_cols(q, h * dh, dh);
    const DenseArray kh = heads == 1 ? k : slice_cols(k, h * dh, dh);
    const DenseArray vh = heads == 1 ? v : slice_cols(v, h * dh, dh);
    DenseArray weights = softmax(scale(matmul_nt(qh, kh), scale_factor), 1);
    DenseArray head_out = matmul(weights, vh);
    if (heads == 1) {
      context = std::move(head_out);
    } else {
      assign_cols(context, h * dh, head_out);
    }
    if (cache) probs.push_back(std::move(weights));
  }
  DenseArray out = linear(context, p["wo"], p["bo"]);
  if (cache) {
    cache->queries = queries;
    cache->kv_source = kv_source;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->context = std::move(context);
  }
  return out;
}

AttentionInputGrads attention_backward(const AttentionCache& cache, const DenseArray& dout,
                                       ParamView p, std::size_t heads, GradView g) {
  const std::size_t m = cache.q.rows();
  const std::size_t kv = cache.k.rows();
  const std::size_t c = cache.q.cols();
  const std::size_t dh = c / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));

  g.accumulate("wo", matmul_tn(cache.context, dout));
  g.accumulate("bo", sum_rows(dout));
  const DenseArray dcontext = matmul_nt(dout, p["wo"]);

  DenseArray dq({m, c}), dk({kv, c}), dv({kv, c});
  for (std::size_t h = 0; h < heads; ++h) {
    const DenseArray& weights = cache.probs[h];
    const DenseArray dctx = heads == 1 ? dcontext : slice_cols(dcontext, h * dh, dh);
    const DenseArray qh = heads == 1 ? cache.q : slice_cols(cache.q, h * dh, dh);
    const DenseArray kh = heads == 1 ? cache.k : slice_cols(cache.k, h * dh, dh);
    const DenseArray vh = heads == 1 ? cache.v : slice_cols(cache.v, h * dh, dh);
    const DenseArray dweights = matmul_nt(dctx, vh);
    const DenseArray dvh = matmul_tn(weights, dctx);
    const DenseArray dscores = scale(softmax_backward(weights, dweights, 1), scale_factor);
    assign_cols(dq, h * dh, matmul(dscores, kh));
    assign_cols(dk, h * dh, matmul_tn(dscores, qh));
    assign_cols(dv, h * dh, dvh);
  }

  g.accumulate("wq", matmul_tn(cache.queries, dq));
  g.accumulate("bq", sum_rows(dq));
  g.accumulate("wk", matmul_tn(cache.kv_source, dk));
  g.accumulate("wv", matmul_tn(cache.kv_source, dv));
  g.accumulate("bv", sum_rows(dv));

  AttentionInputGrads out;
  out.dqueries = matmul_nt(dq, p["wq"]);
  out.dkv_source = add(matmul_nt(dk, p["wk"]), matmul_nt(dv, p["wv"]));
  return out;
}

DenseArray mhsa_forward(const DenseArray& x, ParamView p, std::size_t heads, AttentionCache* cache) {
  return attention_forward(x, x, p, heads, cache);
}

DenseArray mhsa_backward(const AttentionCache& cache, const DenseArray& dout, ParamView p,
                         std::size_t heads, GradView g) {
  auto grads = attention_backward(cache, dout, p, heads, g);
  return add(grads.dqueries, grads.dkv_source);
}

DenseArray attention_matrix(const DenseArray& x, ParamView p, std::size_t heads, std::size_t head) {
  AttentionCache cache;
  attention_forward(x, x, p, heads, &cache);
  if (head >= cache.probs.size()) throw ConfigError("attention_matrix: head out of range");
  return cache.probs[head];
}

}  // namespace isomer::blocks
