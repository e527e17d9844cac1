#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "isomer/blocks/attention.hpp"
#include "isomer/blocks/config.hpp"
#include "isomer/blocks/params.hpp"
#include "isomer/blocks/sublayers.hpp"

// Semantic gathering-scattering block.
//
//   u      = LN1(x)
//   h      = sigmoid(u sgst.wh + sgst.bh)           token gathering heatmap
//   plan   = fg {i : h_i >= 0.5}, bg {i : h_i < 0.5}
//   M      = colsoftmax(sgst.wm) or sgst.wm          N x K merge weights
//   merged = M^T (f * u),  f = h (fg) or 1 - h (bg)  K x C per branch
//   branch = FFN sub-layer of (x_b + Attn(LN1(x_b), merged))
//   out    = branch outputs scattered back through the plan
//
// Both branches share the attention, FFN and merge weights. The threshold
// is treated as constant routing in the backward pass; gradients reach the
// heatmap head only through the multiplicative f * u path.

namespace isomer::blocks {

inline constexpr double kGatherThreshold = 0.5;

/// Foreground/background partition of token positions. Both lists are
/// strictly increasing and together cover 0..N-1 exactly once.
struct GatherPlan {
  std::vector<std::size_t> fg;
  std::vector<std::size_t> bg;

  std::size_t tokens() const { return fg.size() + bg.size(); }
  friend bool operator==(const GatherPlan&, const GatherPlan&) = default;
};

enum class Branch { kForeground, kBackground };

/// Threshold rule: h_i >= 0.5 is foreground (ties go to foreground).
GatherPlan make_gather_plan(std::span<const double> heatmap);

struct GatherResult {
  DenseArray heatmap;  // N values in (0, 1)
  GatherPlan plan;
  DenseArray q_fg;     // N_f x C rows of x in plan order
  DenseArray q_bg;     // N_b x C
};

/// Heatmap head on x, partition, and row gathering.
GatherResult sgst_gather(const DenseArray& x, ParamView p);

/// Branch gating factors: h for the foreground, 1 - h for the background.
DenseArray branch_factor(std::span<const double> heatmap, Branch branch);

/// Merge weights applied to the tokens: column softmax over N of wm, or wm.
DenseArray merge_weights(const DenseArray& wm, MergeNorm norm);

/// merged = norm(wm)^T (factor * x); K x C.
DenseArray sgst_soft_merge(const DenseArray& x, std::span<const double> heatmap,
                           const DenseArray& wm, Branch branch, MergeNorm norm);

struct BranchCache {
  LayerNormResult norm1;
  AttentionCache attention;
  FfnCache ffn;
};

/// Cross-attention of the gathered tokens Q (N_b x C, pre-norm) over the
/// merged tokens, followed by the FFN sub-layer, with residuals. Q may be
/// empty.
DenseArray sgst_branch_attend(const DenseArray& queries, const DenseArray& merged, ParamView p,
                              const BlockConfig& cfg, BranchCache* cache = nullptr);

struct BranchGrads {
  DenseArray dqueries;
  DenseArray dmerged;
};
BranchGrads sgst_branch_attend_backward(const BranchCache& cache, const DenseArray& dout,
                                        ParamView p, const BlockConfig& cfg, GradView g);

/// Writes upd_f rows to plan.fg positions and upd_b rows to plan.bg
/// positions. Throws DimensionError on row-count mismatch or an invalid plan.
DenseArray sgst_scatter(const DenseArray& x, const GatherPlan& plan, const DenseArray& upd_f,
                        const DenseArray& upd_b);

struct SgstBranchState {
  bool active = false;
  DenseArray factor;    // N gating values
  DenseArray enhanced;  // N x C, factor * u
  DenseArray merged;    // K x C
  BranchCache branch;
};

struct SgstCache {
  DenseArray x;
  LayerNormResult norm1;
  DenseArray heatmap;
  bool heatmap_overridden = false;
  GatherPlan plan;
  DenseArray merge;  // normalized N x K weights
  std::array<SgstBranchState, 2> branches;  // [fg, bg]
};

/// Full SGST block. `heatmap_override`, when given, replaces the learned
/// heatmap (N values) for both routing and gating; the heatmap head then
/// receives no gradient.
DenseArray sgst_block_forward(const DenseArray& x, ParamView p, const BlockConfig& cfg,
                              SgstCache* cache = nullptr, SublayerTiming* timing = nullptr,
                              const DenseArray* heatmap_override = nullptr);
DenseArray sgst_block_backward(const SgstCache& cache, const DenseArray& dout, ParamView p,
                               const BlockConfig& cfg, GradView g);

/// Heatmap of the block's attention sub-layer input, sigmoid(LN1(x) wh + bh).
DenseArray sgst_block_heatmap(const DenseArray& x, ParamView p);

}  // namespace isomer::blocks
