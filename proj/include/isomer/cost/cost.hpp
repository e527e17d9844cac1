#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "isomer/blocks/config.hpp"

// Analytic FLOP accounting for the fusion blocks, using the convention of
// isomer/numerics/flops.hpp (1 multiply-add = 2 FLOPs). Each item is the
// exact count the instrumented kernels report for the same forward pass.
//
// MHSA portion: attention scores and weighted sums with their scaling and
// softmax, the Q/K/V/output projections, the SGST gating and soft merge, and
// the attention-map heads (CST spatial head, SGST heatmap head). Norms,
// biases, residuals and the FFN are excluded.
//
// Attention portion: the MHSA portion without the per-token linear maps,
// i.e. without projections and merge; the part whose cost depends on how
// many tokens each query relates to.

namespace isomer::cost {

enum class Category {
  kNorm,
  kProjection,      // Q/K/V/O weight products
  kBias,            // bias adds of the projections and heads
  kAttentionCore,   // scores and weighted sums
  kAttentionSoftmax,// score scaling and softmax
  kHead,            // spatial / heatmap heads, including their activations
  kMerge,           // SGST gating and soft merge
  kContext,         // CST pooling and channel transform
  kResidual,
  kFfn,
};

std::string_view to_string(Category c);

struct CostItem {
  std::string name;
  Category category;
  std::uint64_t flops;
};

struct CostReport {
  std::string block;  // "vt", "cst", "sgst"
  std::size_t tokens = 0;
  std::size_t channels = 0;
  std::size_t heads = 0;
  std::size_t merged = 0;  // K; 0 for blocks without merging
  std::vector<CostItem> items;
  std::uint64_t peak_elements = 0;  // largest single intermediate array

  std::uint64_t total() const;
  std::uint64_t total(Category c) const;
  /// Zero when no item has this name.
  std::uint64_t item(std::string_view name) const;
  std::uint64_t mhsa_portion() const;
  std::uint64_t attention_portion() const;
  /// Everything except the FFN sub-layer.
  std::uint64_t attention_stage() const;
};

/// Vanilla attention sub-layer: LN1, multi-head self-attention, residual.
CostReport flops_mhsa(std::size_t n, std::size_t c, std::size_t heads);
/// CST attention sub-layer: LN1, global context step, broadcast add.
CostReport flops_cst(std::size_t n, std::size_t c, std::size_t context_reduction);
/// SGST attention stage with `n_fg` foreground tokens. Branches that are
/// empty, or the background under fg_only, cost nothing.
CostReport flops_sgst(std::size_t n, std::size_t c, std::size_t heads, std::size_t k,
                      std::size_t n_fg, bool fg_only = false,
                      blocks::MergeNorm norm = blocks::MergeNorm::kSoftmax);

/// Whole block forward including FFN sub-layers. `n_fg` applies to SGST only.
CostReport block_cost(blocks::BlockKind kind, const blocks::BlockConfig& cfg, std::size_t n_fg);

struct SweepRow {
  CostReport report;
  double ratio_vs_vanilla = 1.0;  // mhsa_portion / vanilla mhsa_portion at the same (N, C)
  double attention_ratio_vs_vanilla = 1.0;  // same for attention_portion
};

struct SweepGrid {
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> channels;
  std::vector<blocks::Ratio> ratios;
  std::size_t heads = 1;
  std::size_t context_reduction = 4;
};

/// K/N in {1, 4/9, 1/4, 1/9, 1/36}; stage token counts of a 512 x 512 input at
/// strides 4, 8, 16, 32; C in {64, 256, 512}.
SweepGrid default_sweep_grid();
/// For every (N, C): one vt row, one cst row and one sgst row per ratio, the
/// SGST rows with half the tokens in the foreground.
std::vector<SweepRow> cost_sweep(const SweepGrid& grid);

/// Header: block,N,C,heads,K,item,flops. One row per item, then "total",
/// "mhsa_portion" and "attention_portion".
void write_items_csv(std::ostream& os, const std::vector<SweepRow>& rows);
/// Header: block,N,C,heads,K,total,mhsa_portion,attention_portion,ratio_vs_vt,
/// attention_ratio_vs_vt.
/// One row per sweep row.
void write_summary_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace isomer::cost
