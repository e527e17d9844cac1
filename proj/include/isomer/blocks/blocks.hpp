#pragma once

#include <optional>
#include <variant>

#include "isomer/blocks/attention.hpp"
#include "isomer/blocks/config.hpp"
#include "isomer/blocks/feature_map.hpp"
#include "isomer/blocks/params.hpp"
#include "isomer/blocks/sgst.hpp"
#include "isomer/blocks/sublayers.hpp"
#include "isomer/numerics/ops.hpp"

// Fusion blocks on token matrices (N x C). All blocks use the pre-norm
// skeleton
//
//   y = x + Attn(LN1(x))
//   z = y + FFN(LN2(y)),   FFN(v) = relu(v W1 + b1) W2 + b2
//
// where Attn is multi-head self-attention (vanilla), the broadcast global
// context of CST, or the gathered/merged branch attention of SGST.

namespace isomer::blocks {

// ---- appearance/motion mixing ---------------------------------------------

struct MixCache {
  DenseArray concat;  // N x 2C
};

/// Concatenates the two token matrices along channels (N x 2C) and projects
/// back to C with mix.w (2C x C) and mix.b.
DenseArray mix(const DenseArray& appearance, const DenseArray& motion, ParamView p,
               MixCache* cache = nullptr);
FeatureMap mix(const FeatureMap& appearance, const FeatureMap& motion, ParamView p);

struct MixInputGrads {
  DenseArray dappearance;
  DenseArray dmotion;
};
MixInputGrads mix_backward(const MixCache& cache, const DenseArray& dout, ParamView p, GradView g);

// ---- vanilla Transformer block -------------------------------------------

struct VanillaCache {
  LayerNormResult norm1;
  AttentionCache attention;
  FfnCache ffn;
};

DenseArray vanilla_block_forward(const DenseArray& x, ParamView p, const BlockConfig& cfg,
                                 VanillaCache* cache = nullptr, SublayerTiming* timing = nullptr);
DenseArray vanilla_block_backward(const VanillaCache& cache, const DenseArray& dout, ParamView p,
                                  const BlockConfig& cfg, GradView g);

// ---- Context-Sharing Transformer -------------------------------------------

struct CstContextCache {
  DenseArray tokens;       // input to the context step
  DenseArray weight_map;   // G, N x 1, softmax over positions
  DenseArray context;      // 1 x C
  DenseArray hidden_pre;   // 1 x C/r_c
  LayerNormResult norm;
  DenseArray hidden;       // after ReLU
  DenseArray refined;      // 1 x C
};

/// The shared refinement vector of the global context step: G = softmax
/// over positions of x * cst.wg, context = G^T x, then
/// cst.w2 * relu(LN(cst.w1 * context + cst.b1)) + cst.b2. Shape 1 x C.
DenseArray cst_context(const DenseArray& x, ParamView p, CstContextCache* cache = nullptr);
/// Returns dx given d(refined) (1 x C).
DenseArray cst_context_backward(const CstContextCache& cache, const DenseArray& drefined,
                                ParamView p, GradView g);

/// x_i + refined for every token i.
DenseArray cst_global_context(const DenseArray& x, ParamView p);
/// The one-channel weight map G (N entries, sums to 1).
DenseArray cst_weight_map(const DenseArray& x, ParamView p);

struct CstCache {
  LayerNormResult norm1;
  CstContextCache context;
  FfnCache ffn;
};

DenseArray cst_block_forward(const DenseArray& x, ParamView p, const BlockConfig& cfg,
                             CstCache* cache = nullptr, SublayerTiming* timing = nullptr);
DenseArray cst_block_backward(const CstCache& cache, const DenseArray& dout, ParamView p,
                              const BlockConfig& cfg, GradView g);

// ---- dispatch --------------------------------------------------------------

using BlockCache = std::variant<VanillaCache, CstCache, SgstCache>;

DenseArray block_forward(BlockKind kind, const DenseArray& x, ParamView p, const BlockConfig& cfg,
                         BlockCache* cache = nullptr, SublayerTiming* timing = nullptr);
DenseArray block_backward(BlockKind kind, const BlockCache& cache, const DenseArray& dout,
                          ParamView p, const BlockConfig& cfg, GradView g);

}  // namespace isomer::blocks
