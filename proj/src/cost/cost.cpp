#include "isomer/cost/cost.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <ostream>

#include "isomer/numerics/flops.hpp"

namespace isomer::cost {

namespace {

using u64 = std::uint64_t;
using flops::kPerLayerNormElement;
using flops::kPerLayerNormSlice;
using flops::kPerMac;
using flops::kPerSigmoidElement;
using flops::kPerSoftmaxElement;

constexpr std::array<std::string_view, 5> kFfnItems = {"norm2", "ffn_linear", "ffn_bias",
                                                        "ffn_relu", "residual_ffn"};

u64 layernorm_flops(u64 rows, u64 width) {
  return kPerLayerNormElement * rows * width + kPerLayerNormSlice * rows;
}

void add(CostReport& r, std::string name, Category cat, u64 flops) {
  r.items.push_back({std::move(name), cat, flops});
}

void add_ffn(CostReport& r, u64 rows, u64 c, u64 hidden) {
  add(r, "norm2", Category::kNorm, layernorm_flops(rows, c));
  add(r, "ffn_linear", Category::kFfn, 2 * kPerMac * rows * c * hidden);
  add(r, "ffn_bias", Category::kFfn, rows * hidden + rows * c);
  add(r, "ffn_relu", Category::kFfn, rows * hidden);
  add(r, "residual_ffn", Category::kResidual, rows * c);
  r.peak_elements = std::max<u64>(r.peak_elements, rows * hidden);
}

bool is_ffn_item(std::string_view name) {
  return std::find(kFfnItems.begin(), kFfnItems.end(), name) != kFfnItems.end();
}

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kNorm: return "norm";
    case Category::kProjection: return "projection";
    case Category::kBias: return "bias";
    case Category::kAttentionCore: return "attention_core";
    case Category::kAttentionSoftmax: return "attention_softmax";
    case Category::kHead: return "head";
    case Category::kMerge: return "merge";
    case Category::kContext: return "context";
    case Category::kResidual: return "residual";
    case Category::kFfn: return "ffn";
  }
  return "?";
}

u64 CostReport::total() const {
  u64 s = 0;
  for (const auto& it : items) s += it.flops;
  return s;
}

u64 CostReport::total(Category c) const {
  u64 s = 0;
  for (const auto& it : items) {
    if (it.category == c) s += it.flops;
  }
  return s;
}

u64 CostReport::item(std::string_view name) const {
  for (const auto& it : items) {
    if (it.name == name) return it.flops;
  }
  return 0;
}

u64 CostReport::attention_portion() const {
  return total(Category::kAttentionCore) + total(Category::kAttentionSoftmax) +
         total(Category::kHead);
}

u64 CostReport::mhsa_portion() const {
  return attention_portion() + total(Category::kProjection) + total(Category::kMerge);
}

u64 CostReport::attention_stage() const {
  u64 s = 0;
  for (const auto& it : items) {
    if (!is_ffn_item(it.name)) s += it.flops;
  }
  return s;
}

CostReport flops_mhsa(std::size_t n, std::size_t c, std::size_t heads) {
  if (heads == 0 || c % heads != 0) {
    throw blocks::ConfigError("flops_mhsa: channels not divisible by heads");
  }
  CostReport r{"vt", n, c, heads, 0, {}, 0};
  add(r, "norm1", Category::kNorm, layernorm_flops(n, c));
  add(r, "projections", Category::kProjection, 4 * kPerMac * u64{n} * c * c);
  add(r, "projection_bias", Category::kBias, 3 * u64{n} * c);
  add(r, "attention_core", Category::kAttentionCore, 2 * kPerMac * u64{n} * n * c);
  add(r, "attention_scale", Category::kAttentionSoftmax, u64{n} * n * heads);
  add(r, "attention_softmax", Category::kAttentionSoftmax, kPerSoftmaxElement * n * n * heads);
  add(r, "residual_attn", Category::kResidual, u64{n} * c);
  r.peak_elements = std::max<u64>(u64{n} * n, u64{n} * c);
  return r;
}

CostReport flops_cst(std::size_t n, std::size_t c, std::size_t context_reduction) {
  if (context_reduction == 0 || c % context_reduction != 0) {
    throw blocks::ConfigError("flops_cst: channels not divisible by context_reduction");
  }
  const u64 hid = c / context_reduction;
  CostReport r{"cst", n, c, 0, 0, {}, 0};
  add(r, "norm1", Category::kNorm, layernorm_flops(n, c));
  add(r, "spatial_head", Category::kHead, kPerMac * u64{n} * c);
  add(r, "spatial_softmax", Category::kHead, kPerSoftmaxElement * n);
  add(r, "context_pooling", Category::kAttentionCore, kPerMac * u64{n} * c);
  // T2(relu(LN(T1 context))) with both biases
  add(r, "channel_transform", Category::kContext,
      2 * kPerMac * c * hid + hid + c + layernorm_flops(1, hid) + hid);
  add(r, "broadcast_add", Category::kResidual, u64{n} * c);
  r.peak_elements = u64{n} * c;
  return r;
}

CostReport flops_sgst(std::size_t n, std::size_t c, std::size_t heads, std::size_t k,
                      std::size_t n_fg, bool fg_only, blocks::MergeNorm norm) {
  if (heads == 0 || c % heads != 0) {
    throw blocks::ConfigError("flops_sgst: channels not divisible by heads");
  }
  if (k == 0) throw blocks::ConfigError("flops_sgst: K must be at least 1");
  if (n_fg > n) throw blocks::ConfigError("flops_sgst: more foreground tokens than tokens");
  const u64 n_bg = n - n_fg;
  const bool fg_active = n_fg > 0;
  const bool bg_active = n_bg > 0 && !fg_only;
  const u64 branches = u64{fg_active} + u64{bg_active};
  const u64 a = (fg_active ? n_fg : 0) + (bg_active ? n_bg : 0);

  CostReport r{"sgst", n, c, heads, k, {}, 0};
  add(r, "norm1", Category::kNorm, layernorm_flops(n, c));
  add(r, "heatmap_head", Category::kHead, kPerMac * u64{n} * c);
  add(r, "heatmap_bias", Category::kHead, n);
  add(r, "heatmap_sigmoid", Category::kHead, kPerSigmoidElement * n);
  add(r, "merge_norm", Category::kMerge,
      branches > 0 && norm == blocks::MergeNorm::kSoftmax ? kPerSoftmaxElement * n * k : 0);
  add(r, "gating", Category::kMerge, (bg_active ? u64{n} : 0) + branches * n * c);
  add(r, "merge", Category::kMerge, branches * kPerMac * n * k * c);
  add(r, "branch_norm1", Category::kNorm, layernorm_flops(a, c));
  add(r, "q_projection", Category::kProjection, kPerMac * a * c * c);
  add(r, "kv_projection", Category::kProjection, branches * 2 * kPerMac * k * c * c);
  add(r, "o_projection", Category::kProjection, kPerMac * a * c * c);
  add(r, "projection_bias", Category::kBias, 2 * a * c + branches * k * c);
  add(r, "attention_core", Category::kAttentionCore, 2 * kPerMac * a * k * c);
  add(r, "attention_scale", Category::kAttentionSoftmax, a * k * heads);
  add(r, "attention_softmax", Category::kAttentionSoftmax, kPerSoftmaxElement * a * k * heads);
  add(r, "residual_attn", Category::kResidual, a * c);
  r.peak_elements = std::max<u64>(u64{n} * k, u64{n} * c);
  return r;
}

CostReport block_cost(blocks::BlockKind kind, const blocks::BlockConfig& cfg, std::size_t n_fg) {
  cfg.validate();
  const std::size_t n = cfg.tokens;
  const std::size_t c = cfg.channels;
  CostReport r;
  u64 ffn_rows = n;
  switch (kind) {
    case blocks::BlockKind::kVanilla:
      r = flops_mhsa(n, c, cfg.heads);
      break;
    case blocks::BlockKind::kCst:
      r = flops_cst(n, c, cfg.context_reduction);
      break;
    case blocks::BlockKind::kSgst: {
      r = flops_sgst(n, c, cfg.heads, cfg.merged_tokens(), n_fg, cfg.fg_only, cfg.merge_norm);
      const u64 n_bg = n - n_fg;
      ffn_rows = n_fg + (cfg.fg_only ? 0 : n_bg);
      break;
    }
  }
  add_ffn(r, ffn_rows, c, cfg.ffn_hidden());
  return r;
}

SweepGrid default_sweep_grid() {
  SweepGrid g;
  for (std::size_t stride : {4, 8, 16, 32}) {
    const std::size_t side = 512 / stride;
    g.tokens.push_back(side * side);
  }
  g.channels = {64, 256, 512};
  g.ratios = {{1, 1}, {4, 9}, {1, 4}, {1, 9}, {1, 36}};
  return g;
}

std::vector<SweepRow> cost_sweep(const SweepGrid& grid) {
  std::vector<SweepRow> rows;
  for (std::size_t n : grid.tokens) {
    for (std::size_t c : grid.channels) {
      const CostReport vt = flops_mhsa(n, c, grid.heads);
      const double base = static_cast<double>(vt.mhsa_portion());
      const double base_attention = static_cast<double>(vt.attention_portion());
      auto push = [&](CostReport r) {
        const double ratio = static_cast<double>(r.mhsa_portion()) / base;
        const double attention = static_cast<double>(r.attention_portion()) / base_attention;
        rows.push_back({std::move(r), ratio, attention});
      };
      push(vt);
      push(flops_cst(n, c, grid.context_reduction));
      for (const auto& ratio : grid.ratios) {
        blocks::BlockConfig cfg;
        cfg.tokens = n;
        cfg.merge_ratio = ratio;
        push(flops_sgst(n, c, grid.heads, cfg.merged_tokens(), n / 2));
      }
    }
  }
  return rows;
}

namespace {

void key(std::ostream& os, const CostReport& r) {
  os << r.block << ',' << r.tokens << ',' << r.channels << ',' << r.heads << ',' << r.merged;
}

}  // namespace

void write_items_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "block,N,C,heads,K,item,flops\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    for (const auto& it : r.items) {
      key(os, r);
      os << ',' << it.name << ',' << it.flops << '\n';
    }
    key(os, r);
    os << ",total," << r.total() << '\n';
    key(os, r);
    os << ",mhsa_portion," << r.mhsa_portion() << '\n';
    key(os, r);
    os << ",attention_portion," << r.attention_portion() << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "block,N,C,heads,K,total,mhsa_portion,attention_portion,ratio_vs_vt,"
        "attention_ratio_vs_vt\n";
  char buf[64];
  for (const auto& row : rows) {
    const auto& r = row.report;
    key(os, r);
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", row.ratio_vs_vanilla,
                  row.attention_ratio_vs_vanilla);
    os << ',' << r.total() << ',' << r.mhsa_portion() << ',' << r.attention_portion() << ','
       << buf << '\n';
  }
}

}  // namespace isomer::cost
