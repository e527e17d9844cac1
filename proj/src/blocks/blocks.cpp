#include "isomer/blocks/blocks.hpp"

#include <chrono>

namespace isomer::blocks {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

DenseArray as_row(const DenseArray& v) { return v.reshaped({1, v.size()}); }

void require_tokens(const DenseArray& x, const BlockConfig& cfg, const char* who) {
  if (x.rank() != 2 || x.cols() != cfg.channels) {
    throw DimensionError(std::string(who) + ": expected N x " + std::to_string(cfg.channels) +
                         " tokens, got " + shape_to_string(x.shape()));
  }
}

}  // namespace

// ---- mixing ---------------------------------------------------------------

DenseArray mix(const DenseArray& appearance, const DenseArray& motion, ParamView p,
               MixCache* cache) {
  if (appearance.shape() != motion.shape() || appearance.rank() != 2) {
    throw DimensionError("mix: appearance " + shape_to_string(appearance.shape()) +
                         " vs motion " + shape_to_string(motion.shape()));
  }
  const std::size_t c = appearance.cols();
  DenseArray concat({appearance.rows(), 2 * c});
  assign_cols(concat, 0, appearance);
  assign_cols(concat, c, motion);
  DenseArray out = linear(concat, p["w"], p["b"]);
  if (cache) cache->concat = std::move(concat);
  return out;
}

FeatureMap mix(const FeatureMap& appearance, const FeatureMap& motion, ParamView p) {
  if (appearance.channels() != motion.channels() || appearance.height() != motion.height() ||
      appearance.width() != motion.width()) {
    throw DimensionError("mix: appearance and motion feature maps differ in shape");
  }
  return FeatureMap::from_tokens(mix(appearance.token_view(), motion.token_view(), p),
                                 appearance.height(), appearance.width());
}

MixInputGrads mix_backward(const MixCache& cache, const DenseArray& dout, ParamView p, GradView g) {
  g.accumulate("w", matmul_tn(cache.concat, dout));
  g.accumulate("b", sum_rows(dout));
  const DenseArray dconcat = matmul_nt(dout, p["w"]);
  const std::size_t c = dconcat.cols() / 2;
  return {slice_cols(dconcat, 0, c), slice_cols(dconcat, c, c)};
}

// ---- FFN sub-layer ---------------------------------------------------------

DenseArray ffn_sublayer(const DenseArray& y, ParamView p, FfnCache* cache) {
  LayerNormResult norm = layernorm_forward(y, p["ln2.gamma"], p["ln2.beta"], 1);
  DenseArray hidden_pre = linear(norm.out, p["ffn.w1"], p["ffn.b1"]);
  if (!cache) {
    // Inference: no copies of the N x rC hidden layer.
    relu_inplace(hidden_pre);
    DenseArray out = linear(hidden_pre, p["ffn.w2"], p["ffn.b2"]);
    add_inplace(out, y);
    return out;
  }
  DenseArray hidden = relu(hidden_pre);
  DenseArray out = add(y, linear(hidden, p["ffn.w2"], p["ffn.b2"]));
  cache->norm = std::move(norm);
  cache->hidden_pre = std::move(hidden_pre);
  cache->hidden = std::move(hidden);
  return out;
}

DenseArray ffn_sublayer_backward(const FfnCache& cache, const DenseArray& dz, ParamView p,
                                 GradView g) {
  g.accumulate("ffn.w2", matmul_tn(cache.hidden, dz));
  g.accumulate("ffn.b2", sum_rows(dz));
  const DenseArray dhidden_pre = relu_backward(cache.hidden_pre, matmul_nt(dz, p["ffn.w2"]));
  g.accumulate("ffn.w1", matmul_tn(cache.norm.out, dhidden_pre));
  g.accumulate("ffn.b1", sum_rows(dhidden_pre));
  const auto ln = layernorm_backward(cache.norm, p["ln2.gamma"], matmul_nt(dhidden_pre, p["ffn.w1"]), 1);
  g.accumulate("ln2.gamma", ln.dgamma);
  g.accumulate("ln2.beta", ln.dbeta);
  return add(dz, ln.dx);
}

// ---- vanilla ----------------------------------------------------------------

DenseArray vanilla_block_forward(const DenseArray& x, ParamView p, const BlockConfig& cfg,
                                 VanillaCache* cache, SublayerTiming* timing) {
  require_tokens(x, cfg, "vanilla_block_forward");
  const auto t0 = Clock::now();
  LayerNormResult norm1 = layernorm_forward(x, p["ln1.gamma"], p["ln1.beta"], 1);
  const DenseArray attended =
      mhsa_forward(norm1.out, p.sub("attn."), cfg.heads, cache ? &cache->attention : nullptr);
  const DenseArray y = add(x, attended);
  if (timing) timing->attention_seconds = seconds_since(t0);
  DenseArray z = ffn_sublayer(y, p, cache ? &cache->ffn : nullptr);
  if (cache) cache->norm1 = std::move(norm1);
  return z;
}

DenseArray vanilla_block_backward(const VanillaCache& cache, const DenseArray& dout, ParamView p,
                                  const BlockConfig& cfg, GradView g) {
  const DenseArray dy = ffn_sublayer_backward(cache.ffn, dout, p, g);
  const DenseArray dnorm = mhsa_backward(cache.attention, dy, p.sub("attn."), cfg.heads, g.sub("attn."));
  const auto ln = layernorm_backward(cache.norm1, p["ln1.gamma"], dnorm, 1);
  g.accumulate("ln1.gamma", ln.dgamma);
  g.accumulate("ln1.beta", ln.dbeta);
  return add(dy, ln.dx);
}

// ---- CST ------------------------------------------------------------------------

DenseArray cst_context(const DenseArray& x, ParamView p, CstContextCache* cache) {
  DenseArray weight_map = softmax(matmul(x, p["cst.wg"]), 0);
  DenseArray context = matmul_tn(weight_map, x);
  DenseArray hidden_pre = linear(context, p["cst.w1"], p["cst.b1"]);
  LayerNormResult norm = layernorm_forward(hidden_pre, p["cst.ln.gamma"], p["cst.ln.beta"], 1);
  DenseArray hidden = relu(norm.out);
  DenseArray refined = linear(hidden, p["cst.w2"], p["cst.b2"]);
  if (cache) {
    cache->tokens = x;
    cache->weight_map = std::move(weight_map);
    cache->context = std::move(context);
    cache->hidden_pre = std::move(hidden_pre);
    cache->norm = std::move(norm);
    cache->hidden = std::move(hidden);
    cache->refined = refined;
  }
  return refined;
}

DenseArray cst_context_backward(const CstContextCache& cache, const DenseArray& drefined,
                                ParamView p, GradView g) {
  g.accumulate("cst.w2", matmul_tn(cache.hidden, drefined));
  g.accumulate("cst.b2", sum_rows(drefined));
  const DenseArray dnorm = relu_backward(cache.norm.out, matmul_nt(drefined, p["cst.w2"]));
  const auto ln = layernorm_backward(cache.norm, p["cst.ln.gamma"], dnorm, 1);
  g.accumulate("cst.ln.gamma", ln.dgamma);
  g.accumulate("cst.ln.beta", ln.dbeta);
  g.accumulate("cst.w1", matmul_tn(cache.context, ln.dx));
  g.accumulate("cst.b1", sum_rows(ln.dx));
  const DenseArray dcontext = matmul_nt(ln.dx, p["cst.w1"]);

  // context = G^T x
  const DenseArray dweight = matmul_nt(cache.tokens, dcontext);
  DenseArray dx = matmul(cache.weight_map, dcontext);
  const DenseArray dlogits = softmax_backward(cache.weight_map, dweight, 0);
  g.accumulate("cst.wg", matmul_tn(cache.tokens, dlogits));
  add_inplace(dx, matmul_nt(dlogits, p["cst.wg"]));
  return dx;
}

DenseArray cst_global_context(const DenseArray& x, ParamView p) {
  return add_row(x, cst_context(x, p));
}

DenseArray cst_weight_map(const DenseArray& x, ParamView p) {
  const DenseArray g = softmax(matmul(x, p["cst.wg"]), 0);
  return g.reshaped({g.size()});
}

DenseArray cst_block_forward(const DenseArray& x, ParamView p, const BlockConfig& cfg,
                             CstCache* cache, SublayerTiming* timing) {
  require_tokens(x, cfg, "cst_block_forward");
  const auto t0 = Clock::now();
  LayerNormResult norm1 = layernorm_forward(x, p["ln1.gamma"], p["ln1.beta"], 1);
  const DenseArray refined = cst_context(norm1.out, p, cache ? &cache->context : nullptr);
  const DenseArray y = add_row(x, refined);
  if (timing) timing->attention_seconds = seconds_since(t0);
  DenseArray z = ffn_sublayer(y, p, cache ? &cache->ffn : nullptr);
  if (cache) cache->norm1 = std::move(norm1);
  return z;
}

DenseArray cst_block_backward(const CstCache& cache, const DenseArray& dout, ParamView p,
                              const BlockConfig&, GradView g) {
  const DenseArray dy = ffn_sublayer_backward(cache.ffn, dout, p, g);
  const DenseArray drefined = as_row(sum_rows(dy));
  const DenseArray dnorm = cst_context_backward(cache.context, drefined, p, g);
  const auto ln = layernorm_backward(cache.norm1, p["ln1.gamma"], dnorm, 1);
  g.accumulate("ln1.gamma", ln.dgamma);
  g.accumulate("ln1.beta", ln.dbeta);
  return add(dy, ln.dx);
}

// ---- dispatch ------------------------------------------------------------------

DenseArray block_forward(BlockKind kind, const DenseArray& x, ParamView p, const BlockConfig& cfg,
                         BlockCache* cache, SublayerTiming* timing) {
  switch (kind) {
    case BlockKind::kVanilla: {
      if (!cache) return vanilla_block_forward(x, p, cfg, nullptr, timing);
      auto& c = cache->emplace<VanillaCache>();
      return vanilla_block_forward(x, p, cfg, &c, timing);
    }
    case BlockKind::kCst: {
      if (!cache) return cst_block_forward(x, p, cfg, nullptr, timing);
      auto& c = cache->emplace<CstCache>();
      return cst_block_forward(x, p, cfg, &c, timing);
    }
    case BlockKind::kSgst: {
      if (!cache) return sgst_block_forward(x, p, cfg, nullptr, timing);
      auto& c = cache->emplace<SgstCache>();
      return sgst_block_forward(x, p, cfg, &c, timing);
    }
  }
  throw ConfigError("block_forward: unknown block kind");
}

DenseArray block_backward(BlockKind kind, const BlockCache& cache, const DenseArray& dout,
                          ParamView p, const BlockConfig& cfg, GradView g) {
  switch (kind) {
    case BlockKind::kVanilla:
      return vanilla_block_backward(std::get<VanillaCache>(cache), dout, p, cfg, g);
    case BlockKind::kCst:
      return cst_block_backward(std::get<CstCache>(cache), dout, p, cfg, g);
    case BlockKind::kSgst:
      return sgst_block_backward(std::get<SgstCache>(cache), dout, p, cfg, g);
  }
  throw ConfigError("block_backward: unknown block kind");
}

}  // namespace isomer::blocks
