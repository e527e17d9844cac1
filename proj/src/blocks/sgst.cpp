#include "isomer/blocks/sgst.hpp"

#include <chrono>

#include "isomer/numerics/flops.hpp"
#include "isomer/numerics/ops.hpp"

namespace isomer::blocks {

namespace {

using Clock = std::chrono::steady_clock;

DenseArray heatmap_of(const DenseArray& tokens, ParamView p) {
  const DenseArray h = sigmoid(linear(tokens, p["sgst.wh"], p["sgst.bh"]));
  return h.reshaped({h.size()});
}

const std::vector<std::size_t>& branch_indexes(const GatherPlan& plan, Branch b) {
  return b == Branch::kForeground ? plan.fg : plan.bg;
}

DenseArray branch_attend_impl(const DenseArray& queries, const DenseArray& merged, ParamView p,
                              const BlockConfig& cfg, BranchCache* cache, double* ffn_seconds) {
  LayerNormResult norm1 = layernorm_forward(queries, p["ln1.gamma"], p["ln1.beta"], 1);
  const DenseArray attended = attention_forward(norm1.out, merged, p.sub("attn."), cfg.heads,
                                                cache ? &cache->attention : nullptr);
  const DenseArray y = add(queries, attended);
  const auto t0 = Clock::now();
  DenseArray z = ffn_sublayer(y, p, cache ? &cache->ffn : nullptr);
  if (ffn_seconds) *ffn_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
  if (cache) cache->norm1 = std::move(norm1);
  return z;
}

}  // namespace

GatherPlan make_gather_plan(std::span<const double> heatmap) {
  GatherPlan plan;
  for (std::size_t i = 0; i < heatmap.size(); ++i) {
    (heatmap[i] >= kGatherThreshold ? plan.fg : plan.bg).push_back(i);
  }
  return plan;
}

GatherResult sgst_gather(const DenseArray& x, ParamView p) {
  GatherResult r;
  r.heatmap = heatmap_of(x, p);
  r.plan = make_gather_plan(r.heatmap.data());
  r.q_fg = gather_rows(x, r.plan.fg);
  r.q_bg = gather_rows(x, r.plan.bg);
  return r;
}

DenseArray branch_factor(std::span<const double> heatmap, Branch branch) {
  DenseArray f({heatmap.size()});
  if (branch == Branch::kForeground) {
    for (std::size_t i = 0; i < heatmap.size(); ++i) f[i] = heatmap[i];
    return f;
  }
  for (std::size_t i = 0; i < heatmap.size(); ++i) f[i] = 1.0 - heatmap[i];
  flops::count(heatmap.size());
  return f;
}

DenseArray merge_weights(const DenseArray& wm, MergeNorm norm) {
  return norm == MergeNorm::kSoftmax ? softmax(wm, 0) : wm;
}

DenseArray sgst_soft_merge(const DenseArray& x, std::span<const double> heatmap,
                           const DenseArray& wm, Branch branch, MergeNorm norm) {
  if (wm.rank() != 2 || wm.rows() != x.rows() || heatmap.size() != x.rows()) {
    throw DimensionError("sgst_soft_merge: merge matrix " + shape_to_string(wm.shape()) +
                         " and heatmap length " + std::to_string(heatmap.size()) +
                         " must match " + std::to_string(x.rows()) + " tokens");
  }
  if (wm.cols() == 0) throw DimensionError("sgst_soft_merge: K must be at least 1");
  const DenseArray factor = branch_factor(heatmap, branch);
  return matmul_tn(merge_weights(wm, norm), scale_rows(x, factor.data()));
}

DenseArray sgst_branch_attend(const DenseArray& queries, const DenseArray& merged, ParamView p,
                              const BlockConfig& cfg, BranchCache* cache) {
  return branch_attend_impl(queries, merged, p, cfg, cache, nullptr);
}

BranchGrads sgst_branch_attend_backward(const BranchCache& cache, const DenseArray& dout,
                                        ParamView p, const BlockConfig& cfg, GradView g) {
  const DenseArray dy = ffn_sublayer_backward(cache.ffn, dout, p, g);
  auto att = attention_backward(cache.attention, dy, p.sub("attn."), cfg.heads, g.sub("attn."));
  const auto ln = layernorm_backward(cache.norm1, p["ln1.gamma"], att.dqueries, 1);
  g.accumulate("ln1.gamma", ln.dgamma);
  g.accumulate("ln1.beta", ln.dbeta);
  return {add(dy, ln.dx), std::move(att.dkv_source)};
}

DenseArray sgst_scatter(const DenseArray& x, const GatherPlan& plan, const DenseArray& upd_f,
                        const DenseArray& upd_b) {
  if (x.rank() != 2) throw DimensionError("sgst_scatter: tokens must be N x C");
  if (plan.fg.size() != upd_f.rows() || plan.bg.size() != upd_b.rows()) {
    throw DimensionError("sgst_scatter: plan has " + std::to_string(plan.fg.size()) + "/" +
                         std::to_string(plan.bg.size()) + " fg/bg tokens but updates have " +
                         std::to_string(upd_f.rows()) + "/" + std::to_string(upd_b.rows()) +
                         " rows");
  }
  if (plan.tokens() != x.rows()) {
    throw DimensionError("sgst_scatter: plan covers " + std::to_string(plan.tokens()) +
                         " positions, tokens have " + std::to_string(x.rows()));
  }
  std::vector<char> seen(x.rows(), 0);
  for (const auto* list : {&plan.fg, &plan.bg}) {
    for (std::size_t i : *list) {
      if (i >= x.rows() || seen[i]) throw DimensionError("sgst_scatter: plan is not a partition");
      seen[i] = 1;
    }
  }
  DenseArray out(x.shape());
  scatter_rows(out, plan.fg, upd_f);
  scatter_rows(out, plan.bg, upd_b);
  return out;
}

DenseArray sgst_block_forward(const DenseArray& x, ParamView p, const BlockConfig& cfg,
                              SgstCache* cache, SublayerTiming* timing,
                              const DenseArray* heatmap_override) {
  if (x.rank() != 2 || x.cols() != cfg.channels || x.rows() != cfg.tokens) {
    throw DimensionError("sgst_block_forward: expected " + std::to_string(cfg.tokens) + " x " +
                         std::to_string(cfg.channels) + " tokens, got " +
                         shape_to_string(x.shape()));
  }
  const auto t0 = Clock::now();
  double ffn_seconds = 0.0;

  LayerNormResult norm1 = layernorm_forward(x, p["ln1.gamma"], p["ln1.beta"], 1);
  DenseArray heatmap;
  if (heatmap_override) {
    if (heatmap_override->size() != x.rows()) {
      throw DimensionError("sgst_block_forward: heatmap override has wrong length");
    }
    heatmap = heatmap_override->reshaped({x.rows()});
  } else {
    heatmap = heatmap_of(norm1.out, p);
  }
  GatherPlan plan = make_gather_plan(heatmap.data());

  const Branch kinds[2] = {Branch::kForeground, Branch::kBackground};
  bool active[2];
  for (int b = 0; b < 2; ++b) {
    const auto& idx = branch_indexes(plan, kinds[b]);
    active[b] = !idx.empty() && !(kinds[b] == Branch::kBackground && cfg.fg_only);
  }

  DenseArray merge, merge_t;
  if (active[0] || active[1]) {
    merge = merge_weights(p["sgst.wm"], cfg.merge_norm);
    merge_t = transpose(merge);  // shared by both branches
  }

  DenseArray updates[2];
  for (int b = 0; b < 2; ++b) {
    const auto& idx = branch_indexes(plan, kinds[b]);
    const DenseArray gathered = gather_rows(x, idx);
    if (!active[b]) {
      updates[b] = gathered;
      continue;
    }
    DenseArray factor = branch_factor(heatmap.data(), kinds[b]);
    DenseArray enhanced = scale_rows(norm1.out, factor.data());
    DenseArray merged = matmul(merge_t, enhanced);
    SgstBranchState* state = cache ? &cache->branches[b] : nullptr;
    updates[b] = branch_attend_impl(gathered, merged, p, cfg, state ? &state->branch : nullptr,
                                    &ffn_seconds);
    if (state) {
      state->active = true;
      state->factor = std::move(factor);
      state->enhanced = std::move(enhanced);
      state->merged = std::move(merged);
    }
  }
  DenseArray out = sgst_scatter(x, plan, updates[0], updates[1]);
  if (timing) {
    timing->attention_seconds =
        std::chrono::duration<double>(Clock::now() - t0).count() - ffn_seconds;
  }
  if (cache) {
    cache->x = x;
    cache->norm1 = std::move(norm1);
    cache->heatmap = std::move(heatmap);
    cache->heatmap_overridden = heatmap_override != nullptr;
    cache->plan = std::move(plan);
    cache->merge = std::move(merge);
  }
  return out;
}

DenseArray sgst_block_backward(const SgstCache& cache, const DenseArray& dout, ParamView p,
                               const BlockConfig& cfg, GradView g) {
  const std::size_t n = cache.x.rows();
  const std::size_t c = cache.x.cols();
  DenseArray dx({n, c});
  DenseArray dnorm({n, c});
  DenseArray dheat({n});
  DenseArray dmerge;
  bool any_active = false;

  const Branch kinds[2] = {Branch::kForeground, Branch::kBackground};
  for (int b = 0; b < 2; ++b) {
    const auto& idx = branch_indexes(cache.plan, kinds[b]);
    if (idx.empty()) continue;
    const DenseArray dbranch = gather_rows(dout, idx);
    const SgstBranchState& state = cache.branches[b];
    if (!state.active) {
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < c; ++j) dx(idx[r], j) += dbranch(r, j);
      continue;
    }
    auto grads = sgst_branch_attend_backward(state.branch, dbranch, p, cfg, g);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < c; ++j) dx(idx[r], j) += grads.dqueries(r, j);

    // merged = M^T enhanced
    DenseArray dm = matmul_nt(state.enhanced, grads.dmerged);
    if (any_active) {
      add_inplace(dmerge, dm);
    } else {
      dmerge = std::move(dm);
      any_active = true;
    }
    const DenseArray denhanced = matmul(cache.merge, grads.dmerged);
    // enhanced = factor * u
    add_inplace(dnorm, scale_rows(denhanced, state.factor.data()));
    const double sign = kinds[b] == Branch::kForeground ? 1.0 : -1.0;
    const DenseArray& u = cache.norm1.out;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += denhanced(i, j) * u(i, j);
      dheat[i] += sign * s;
    }
  }

  if (any_active) {
    g.accumulate("sgst.wm", cfg.merge_norm == MergeNorm::kSoftmax
                                ? softmax_backward(cache.merge, dmerge, 0)
                                : dmerge);
  }
  if (!cache.heatmap_overridden) {
    const DenseArray dlogit = sigmoid_backward(cache.heatmap, dheat).reshaped({n, 1});
    g.accumulate("sgst.wh", matmul_tn(cache.norm1.out, dlogit));
    g.accumulate("sgst.bh", sum_rows(dlogit));
    add_inplace(dnorm, matmul_nt(dlogit, p["sgst.wh"]));
  }
  const auto ln = layernorm_backward(cache.norm1, p["ln1.gamma"], dnorm, 1);
  g.accumulate("ln1.gamma", ln.dgamma);
  g.accumulate("ln1.beta", ln.dbeta);
  add_inplace(dx, ln.dx);
  return dx;
}

DenseArray sgst_block_heatmap(const DenseArray& x, ParamView p) {
  return heatmap_of(layernorm(x, p["ln1.gamma"], p["ln1.beta"], 1), p);
}

}  // namespace isomer::blocks
