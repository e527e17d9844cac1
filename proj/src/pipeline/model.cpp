#include "isomer/pipeline/model.hpp"

#include <cmath>

#include "isomer/numerics/ops.hpp"
#include "isomer/numerics/rng.hpp"

namespace isomer::pipeline {

namespace {

using blocks::GradView;
using blocks::ParamView;

std::size_t up_index(std::size_t i, std::size_t from, std::size_t to) { return i * to / from; }

void require_binary(const DenseArray& logits, const DenseArray& target, const char* who) {
  if (logits.size() != target.size()) {
    throw DimensionError(std::string(who) + ": logits " + shape_to_string(logits.shape()) +
                         " vs target " + shape_to_string(target.shape()));
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] != 0.0 && target[i] != 1.0) {
      throw std::invalid_argument(std::string(who) + ": target value " +
                                  std::to_string(target[i]) + " at index " + std::to_string(i) +
                                  " is not 0 or 1");
    }
  }
}

}  // namespace

std::string stage_prefix(std::size_t stage) { return "stage" + std::to_string(stage) + "."; }

std::vector<blocks::ParamSpec> model_schema(const IsomerConfig& cfg) {
  cfg.validate();
  std::vector<blocks::ParamSpec> out;
  auto append = [&](const std::string& prefix, std::vector<blocks::ParamSpec> specs) {
    for (auto& s : specs) {
      s.name = prefix + s.name;
      out.push_back(std::move(s));
    }
  };
  for (std::size_t l = 1; l <= kStages; ++l) {
    const auto bc = cfg.stage_config(l);
    append(stage_prefix(l) + "mix.", blocks::mix_schema(bc.channels));
    append(stage_prefix(l) + "block.", blocks::block_schema(cfg.stage_kind(l), bc));
  }
  for (std::size_t l = 1; l <= kStages; ++l) {
    const std::size_t c = cfg.channels[l - 1];
    out.push_back({"decoder.proj" + std::to_string(l) + ".w", {c, cfg.decoder_width},
                   blocks::Init::kWeight, c});
  }
  out.push_back({"decoder.head.w", {cfg.decoder_width, 1}, blocks::Init::kWeight,
                 cfg.decoder_width});
  out.push_back({"decoder.head.b", {1}, blocks::Init::kBias, cfg.decoder_width});
  return out;
}

ParamSet init_model(const IsomerConfig& cfg) {
  Rng rng(cfg.init_seed);
  return blocks::init_params(model_schema(cfg), rng);
}

DenseArray fuse_stage(std::size_t stage, const FeatureMap& appearance, const FeatureMap& motion,
                      const ParamSet& params, const IsomerConfig& cfg, StageCache* cache) {
  const auto bc = cfg.stage_config(stage);
  if (appearance.channels() != bc.channels || appearance.tokens() != bc.tokens) {
    throw DimensionError("stage " + std::to_string(stage) + ": feature map is " +
                         std::to_string(appearance.channels()) + " x " +
                         std::to_string(appearance.height()) + " x " +
                         std::to_string(appearance.width()) + ", config expects " +
                         std::to_string(bc.channels) + " channels and " +
                         std::to_string(bc.tokens) + " tokens");
  }
  const std::string prefix = stage_prefix(stage);
  const DenseArray mixed = blocks::mix(appearance.token_view(), motion.token_view(),
                                       ParamView(params, prefix + "mix."),
                                       cache ? &cache->mix : nullptr);
  return blocks::block_forward(cfg.stage_kind(stage), mixed, ParamView(params, prefix + "block."),
                               bc, cache ? &cache->block : nullptr);
}

StageStack isomer_fuse(const StageStack& appearance, const StageStack& motion,
                       const ParamSet& params, const IsomerConfig& cfg, FuseCache* cache) {
  cfg.validate();
  StageStack out;
  for (std::size_t l = 1; l <= kStages; ++l) {
    const auto& a = appearance.stages[l - 1];
    out.stages[l - 1] = FeatureMap::from_tokens(
        fuse_stage(l, a, motion.stages[l - 1], params, cfg, cache ? &cache->stages[l - 1] : nullptr),
        a.height(), a.width());
  }
  return out;
}

DenseArray decode(const StageStack& fused, const ParamSet& params, const IsomerConfig& cfg,
                  DecodeCache* cache) {
  const std::size_t h1 = fused.stages[0].height(), w1 = fused.stages[0].width();
  const std::size_t d = cfg.decoder_width;
  DenseArray sum({h1 * w1, d});
  std::array<DenseArray, kStages> tokens;
  for (std::size_t l = 0; l < kStages; ++l) {
    const FeatureMap& f = fused.stages[l];
    tokens[l] = f.token_view();
    const DenseArray proj =
        matmul(tokens[l], params.at("decoder.proj" + std::to_string(l + 1) + ".w"));
    DenseArray up({h1 * w1, d});
    for (std::size_t y = 0; y < h1; ++y)
      for (std::size_t x = 0; x < w1; ++x) {
        const std::size_t src = up_index(y, h1, f.height()) * f.width() + up_index(x, w1, f.width());
        for (std::size_t j = 0; j < d; ++j) up(y * w1 + x, j) = proj(src, j);
      }
    if (l == 0) {
      sum = std::move(up);
    } else {
      add_inplace(sum, up);
    }
  }
  DenseArray logits = linear(sum, params.at("decoder.head.w"), params.at("decoder.head.b"));
  if (cache) {
    cache->tokens = std::move(tokens);
    cache->sum = std::move(sum);
  }
  return logits.reshaped({1, h1, w1});
}

std::array<DenseArray, kStages> decode_backward(const DecodeCache& cache, const DenseArray& dlogits,
                                                const ParamSet& params, const IsomerConfig& cfg,
                                                GradView grads) {
  const std::size_t n1 = cache.sum.rows();
  const std::size_t d = cfg.decoder_width;
  const DenseArray dl = dlogits.reshaped({n1, 1});
  grads.accumulate("decoder.head.w", matmul_tn(cache.sum, dl));
  grads.accumulate("decoder.head.b", sum_rows(dl));
  const DenseArray dsum = matmul_nt(dl, params.at("decoder.head.w"));

  const std::size_t side1 = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n1))));
  std::array<DenseArray, kStages> out;
  for (std::size_t l = 0; l < kStages; ++l) {
    const std::size_t side = cfg.stage_side(l + 1);
    DenseArray dproj({side * side, d});
    for (std::size_t y = 0; y < side1; ++y)
      for (std::size_t x = 0; x < side1; ++x) {
        const std::size_t src = up_index(y, side1, side) * side + up_index(x, side1, side);
        for (std::size_t j = 0; j < d; ++j) dproj(src, j) += dsum(y * side1 + x, j);
      }
    const std::string name = "decoder.proj" + std::to_string(l + 1) + ".w";
    grads.accumulate(name, matmul_tn(cache.tokens[l], dproj));
    out[l] = matmul_nt(dproj, params.at(name));
  }
  return out;
}

double bce_loss(const DenseArray& logits, const DenseArray& target) {
  require_binary(logits, target, "bce_loss");
  if (logits.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    s += std::max(z, 0.0) - z * target[i] + std::log1p(std::exp(-std::abs(z)));
  }
  return s / static_cast<double>(logits.size());
}

DenseArray bce_grad(const DenseArray& logits, const DenseArray& target) {
  require_binary(logits, target, "bce_grad");
  const DenseArray p = sigmoid(logits);
  DenseArray g(logits.shape());
  const double inv = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (p[i] - target[i]) * inv;
  return g;
}

double iou(const DenseArray& logits, const DenseArray& target) {
  require_binary(logits, target, "iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const bool p = logits[i] >= 0.0;
    const bool t = target[i] == 1.0;
    inter += p && t;
    uni += p || t;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

FrameOutput forward_frame(const Frame& frame, const ParamSet& params, const IsomerConfig& cfg,
                          FrameCache* cache) {
  const StageStack fused =
      isomer_fuse(frame.appearance, frame.motion, params, cfg, cache ? &cache->fuse : nullptr);
  FrameOutput out;
  out.logits = decode(fused, params, cfg, cache ? &cache->decode : nullptr);
  out.loss = bce_loss(out.logits, frame.target);
  return out;
}

void backward_frame(const FrameCache& cache, const FrameOutput& out, const Frame& frame,
                    const ParamSet& params, const IsomerConfig& cfg, ParamSet& grads,
                    double weight) {
  DenseArray dlogits = bce_grad(out.logits, frame.target);
  if (weight != 1.0) dlogits = scale(dlogits, weight);
  const auto dtokens = decode_backward(cache.decode, dlogits, params, cfg, grads);
  for (std::size_t l = 1; l <= kStages; ++l) {
    const std::string prefix = stage_prefix(l);
    const auto& sc = cache.fuse.stages[l - 1];
    const DenseArray dmixed =
        blocks::block_backward(cfg.stage_kind(l), sc.block, dtokens[l - 1],
                               ParamView(params, prefix + "block."), cfg.stage_config(l),
                               GradView(grads, prefix + "block."));
    blocks::mix_backward(sc.mix, dmixed, ParamView(params, prefix + "mix."),
                         GradView(grads, prefix + "mix."));
  }
}

std::vector<std::vector<std::size_t>> routing_signature(const FrameCache& cache,
                                                        const IsomerConfig& cfg) {
  std::vector<std::vector<std::size_t>> sig;
  for (std::size_t l = 1; l <= kStages; ++l) {
    if (cfg.stage_kind(l) != BlockKind::kSgst) continue;
    const auto& sc = std::get<blocks::SgstCache>(cache.fuse.stages[l - 1].block);
    sig.push_back(sc.plan.fg);
  }
  return sig;
}

}  // namespace isomer::pipeline
