#pragma once

#include <array>
#include <string>
#include <vector>

#include "isomer/blocks/blocks.hpp"
#include "isomer/blocks/schema.hpp"
#include "isomer/pipeline/config.hpp"
#include "isomer/pipeline/synth.hpp"

// Four independent fusion stages followed by a toy decoder.
//
//   stage l:  X_l = mix(I_l, M_l)            stage{l}.mix.w, .b
//             E_l = block_l(X_l)             stage{l}.block.*
//   decoder:  P_l = E_l W_l                  decoder.proj{l}.w   (C_l x D)
//             S   = sum_l up(P_l)            nearest upsample to stage-1 size
//             logits = S w_h + b_h           decoder.head.w, .b  (D x 1)

namespace isomer::pipeline {

using blocks::ParamSet;

std::string stage_prefix(std::size_t stage);

std::vector<blocks::ParamSpec> model_schema(const IsomerConfig& cfg);
/// All tensors drawn in schema order from Rng(cfg.init_seed).
ParamSet init_model(const IsomerConfig& cfg);

struct StageCache {
  blocks::MixCache mix;
  blocks::BlockCache block;
};

struct FuseCache {
  std::array<StageCache, kStages> stages;
};

/// Fused tokens (N_l x C_l) of one stage; depends on no other stage.
DenseArray fuse_stage(std::size_t stage, const FeatureMap& appearance, const FeatureMap& motion,
                      const ParamSet& params, const IsomerConfig& cfg, StageCache* cache = nullptr);

StageStack isomer_fuse(const StageStack& appearance, const StageStack& motion,
                       const ParamSet& params, const IsomerConfig& cfg, FuseCache* cache = nullptr);

struct DecodeCache {
  std::array<DenseArray, kStages> tokens;  // E_l as N_l x C_l
  DenseArray sum;                          // N_1 x D
};

/// Logits of shape 1 x H1 x W1.
DenseArray decode(const StageStack& fused, const ParamSet& params, const IsomerConfig& cfg,
                  DecodeCache* cache = nullptr);
/// Returns dE_l (N_l x C_l) for every stage.
std::array<DenseArray, kStages> decode_backward(const DecodeCache& cache, const DenseArray& dlogits,
                                                const ParamSet& params, const IsomerConfig& cfg,
                                                blocks::GradView grads);

/// Mean binary cross-entropy with logits, computed as
/// max(z, 0) - z y + log1p(exp(-|z|)). Targets must be exactly 0 or 1.
double bce_loss(const DenseArray& logits, const DenseArray& target);
/// Gradient of bce_loss: (sigmoid(z) - y) / count.
DenseArray bce_grad(const DenseArray& logits, const DenseArray& target);
/// Intersection over union of {z >= 0} and {y = 1}; 1 when both are empty.
double iou(const DenseArray& logits, const DenseArray& target);

struct FrameCache {
  FuseCache fuse;
  DecodeCache decode;
};

struct FrameOutput {
  DenseArray logits;
  double loss = 0.0;
};

FrameOutput forward_frame(const Frame& frame, const ParamSet& params, const IsomerConfig& cfg,
                          FrameCache* cache = nullptr);
/// Accumulates weight * d(loss)/d(params) into `grads`.
void backward_frame(const FrameCache& cache, const FrameOutput& out, const Frame& frame,
                    const ParamSet& params, const IsomerConfig& cfg, ParamSet& grads,
                    double weight = 1.0);

/// Foreground/background partitions of every SGST stage of a forward pass,
/// concatenated; equal signatures mean identical routing.
std::vector<std::vector<std::size_t>> routing_signature(const FrameCache& cache,
                                                        const IsomerConfig& cfg);

}  // namespace isomer::pipeline
