#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "isomer/numerics/ops.hpp"
#include "isomer/numerics/rng.hpp"
#include "isomer/pipeline/train.hpp"

using namespace isomer;
using namespace isomer::pipeline;

namespace {

ParamSet zero_blocks(ParamSet p) {
  for (auto& [name, value] : p) {
    const bool attn = name.find(".block.attn.") != std::string::npos;
    const bool ffn = name.find(".block.ffn.") != std::string::npos;
    const bool cst_out = name.ends_with(".block.cst.w2") || name.ends_with(".block.cst.b2");
    if (attn || ffn || cst_out) value = DenseArray(value.shape());
  }
  return p;
}

}  // namespace

TEST_CASE("config requires every stage to be assigned") {
  IsomerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.assignment.erase(3);
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("stage 3"), ConfigError);
  cfg = IsomerConfig{};
  cfg.resolution = 48;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(parse_assignment("cst,cst,sgst"), ConfigError);
  CHECK(parse_assignment("vt,cst,sgst,sgst").at(1) == BlockKind::kVanilla);
}

TEST_CASE("config JSON round trip and overrides") {
  IsomerConfig cfg;
  cfg.assignment = parse_assignment("sgst,sgst,cst,cst");
  cfg.merge_ratio = {1, 4};
  cfg.lr = 3e-4;
  const IsomerConfig back = config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  const IsomerConfig over = config_from_json(nlohmann::json{{"steps", 5}, {"channels", 8}}, cfg);
  CHECK(over.steps == 5);
  CHECK(over.channels[3] == 8);
  CHECK(over.lr == 3e-4);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"stepz", 5}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"steps", "many"}}), ConfigError);
}

TEST_CASE("stage sizes follow strides 4, 8, 16, 32") {
  IsomerConfig cfg;
  CHECK(cfg.stage_side(1) == 16);
  CHECK(cfg.stage_side(4) == 2);
  const IsomerConfig tiny = tiny_config();
  CHECK(tiny.stage_side(1) == 8);
  CHECK(tiny.stage_side(4) == 1);
  CHECK(tiny.stage_config(3).merged_tokens() == 1);
}

TEST_CASE("synthetic clips are reproducible") {
  const IsomerConfig cfg = tiny_config();
  const Clip a = synth_clip(5, 64, 3, cfg.channels);
  const Clip b = synth_clip(5, 64, 3, cfg.channels);
  REQUIRE(a.frames.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(a.frames[t].image == b.frames[t].image);
    CHECK(a.frames[t].appearance == b.frames[t].appearance);
    CHECK(a.frames[t].motion == b.frames[t].motion);
    CHECK(a.frames[t].target == b.frames[t].target);
  }
  CHECK_FALSE(synth_clip(6, 64, 3, cfg.channels).frames[0].image == a.frames[0].image);
  CHECK_THROWS_AS(synth_clip(5, 40, 1, cfg.channels), ConfigError);
}

TEST_CASE("static scenes have zero motion features") {
  const Clip clip = synth_clip(9, 64, 3, {4, 4, 4, 4}, true);
  for (const Frame& f : clip.frames) {
    for (const auto& stage : f.motion.stages) {
      for (double v : stage.data().data()) CHECK(v == 0.0);
    }
  }
  const Clip moving = synth_clip(9, 64, 3, {4, 4, 4, 4});
  double energy = 0.0;
  for (double v : moving.frames[0].motion.stages[0].data().data()) energy += v * v;
  CHECK(energy > 0.0);
}

TEST_CASE("rasterized shape area matches the analytic area") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Scene scene = random_scene(seed, 128, 1);
    for (const auto& shape : std::vector<Shape2d>(scene.shapes)) {
      scene.shapes = {shape};
      const Clip clip = render_clip(scene, 1, {4, 4, 4, 4}, 1);
      const double count = sum_all(clip.frames[0].mask);
      const double perimeter = shape.kind == Shape2d::Kind::kDisc
                                   ? 2.0 * std::numbers::pi * shape.rx
                                   : 4.0 * (shape.rx + shape.ry);
      CHECK(std::abs(count - shape.area()) <= perimeter + 4.0);
    }
  }
}

TEST_CASE("fusion preserves stage shapes and is per-stage independent") {
  const IsomerConfig cfg = tiny_config();
  const ParamSet p = init_model(cfg);
  const Clip clip = synth_clip(cfg);
  const Frame& f = clip.frames[0];
  const StageStack fused = isomer_fuse(f.appearance, f.motion, p, cfg);
  for (std::size_t l = 0; l < kStages; ++l) {
    CHECK(fused.stages[l].channels() == f.appearance.stages[l].channels());
    CHECK(fused.stages[l].height() == f.appearance.stages[l].height());
    CHECK(fused.stages[l].width() == f.appearance.stages[l].width());
  }
  for (std::size_t l = kStages; l >= 1; --l) {
    const DenseArray alone =
        fuse_stage(l, f.appearance.stages[l - 1], f.motion.stages[l - 1], p, cfg);
    CHECK(alone == fused.stages[l - 1].token_view());
  }
}

TEST_CASE("zeroed block weights make fusion equal to mixing") {
  for (const char* assignment : {"cst,cst,sgst,sgst", "vt,vt,vt,vt", "sgst,cst,sgst,cst"}) {
    IsomerConfig cfg = tiny_config();
    cfg.assignment = parse_assignment(assignment);
    const ParamSet p = zero_blocks(init_model(cfg));
    const Clip clip = synth_clip(cfg);
    const Frame& f = clip.frames[0];
    const StageStack fused = isomer_fuse(f.appearance, f.motion, p, cfg);
    for (std::size_t l = 1; l <= kStages; ++l) {
      const DenseArray mixed =
          blocks::mix(f.appearance.stages[l - 1].token_view(), f.motion.stages[l - 1].token_view(),
                      blocks::ParamView(p, stage_prefix(l) + "mix."));
      CHECK(fused.stages[l - 1].token_view() == mixed);
    }
  }
}

TEST_CASE("all-CST assignment is a valid topology") {
  IsomerConfig cfg = tiny_config();
  cfg.assignment = parse_assignment("cst,cst,cst,cst");
  const ParamSet p = init_model(cfg);
  CHECK(p.contains("stage4.block.cst.wg"));
  CHECK_FALSE(p.contains("stage4.block.sgst.wm"));
  const Clip clip = synth_clip(cfg);
  CHECK(forward_frame(clip.frames[0], p, cfg).logits.all_finite());
}

TEST_CASE("decoder of zero features with zero head bias gives zero logits") {
  const IsomerConfig cfg = tiny_config();
  ParamSet p = init_model(cfg);
  p.at("decoder.head.b")[0] = 0.0;
  StageStack zero;
  for (std::size_t l = 1; l <= kStages; ++l) {
    const std::size_t side = cfg.stage_side(l);
    zero.stages[l - 1] = FeatureMap(cfg.channels[l - 1], side, side);
  }
  const DenseArray logits = decode(zero, p, cfg);
  CHECK(logits.shape() == Shape{1, 8, 8});
  for (double v : logits.data()) CHECK(v == 0.0);
  const DenseArray probs = sigmoid(logits);
  for (double v : probs.data()) CHECK(v == 0.5);
}

TEST_CASE("binary cross-entropy closed forms") {
  const DenseArray z({2, 2});
  const DenseArray y({2, 2}, {0, 1, 1, 0});
  CHECK(bce_loss(z, y) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const DenseArray sat({2, 2}, {-50, 50, 50, -50});
  CHECK(bce_loss(sat, y) < 1e-20);
  CHECK_THROWS_AS(bce_loss(z, DenseArray({2, 2}, {0, 0.5, 1, 0})), std::invalid_argument);
  CHECK_THROWS_AS(bce_loss(z, DenseArray({3})), DimensionError);
}

TEST_CASE("stable cross-entropy matches the naive formula for moderate logits") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    DenseArray z = rng.uniform_array({16}, -5.0, 5.0);
    DenseArray y({16});
    for (std::size_t i = 0; i < 16; ++i) y[i] = static_cast<double>(rng.below(2));
    double naive = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
      const double s = 1.0 / (1.0 + std::exp(-z[i]));
      naive -= y[i] * std::log(s) + (1.0 - y[i]) * std::log(1.0 - s);
    }
    CHECK(std::abs(bce_loss(z, y) - naive / 16.0) < 1e-10);
  }
}

TEST_CASE("IoU of thresholded logits") {
  const DenseArray y({4}, {1, 1, 0, 0});
  CHECK(iou(DenseArray({4}, {1, 1, -1, -1}), y) == 1.0);
  CHECK(iou(DenseArray({4}, {1, -1, 1, -1}), y) == doctest::Approx(1.0 / 3.0));
  CHECK(iou(DenseArray({4}, {-1, -1, -1, -1}), DenseArray({4})) == 1.0);
}

TEST_CASE("AdamW with zero gradients only applies weight decay") {
  ParamSet p;
  p.set("a", DenseArray({3}, {1.0, -2.0, 0.5}));
  const ParamSet before = p;
  AdamWState state;
  AdamWOptions opt;
  adamw_update(p, p.zeros_like(), state, opt);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(p.at("a")[i] == before.at("a")[i] - opt.lr * opt.weight_decay * before.at("a")[i]);
  }
  opt.weight_decay = 0.0;
  const ParamSet mid = p;
  adamw_update(p, p.zeros_like(), state, opt);
  CHECK(p == mid);
}

TEST_CASE("AdamW minimizes a quadratic") {
  Rng rng(4);
  const DenseArray target = rng.normal_array({10});
  ParamSet p;
  p.set("x", DenseArray({10}));
  AdamWState state;
  AdamWOptions opt;
  opt.lr = 0.05;
  opt.weight_decay = 0.0;
  double loss = 0.0;
  std::size_t steps = 0;
  for (; steps < 2000; ++steps) {
    const DenseArray diff = sub(p.at("x"), target);
    loss = 0.0;
    for (double d : diff.data()) loss += 0.5 * d * d;
    if (loss < 1e-6) break;
    ParamSet g;
    g.set("x", diff);
    adamw_update(p, g, state, opt);
  }
  CHECK(loss < 1e-6);
  CHECK(steps <= 2000);
}

TEST_CASE("training is deterministic") {
  IsomerConfig cfg = tiny_config();
  cfg.frames = 2;
  const Clip clip = synth_clip(cfg);
  auto run = [&] {
    ParamSet p = init_model(cfg);
    AdamWState state;
    std::vector<double> losses;
    for (int i = 0; i < 100; ++i) losses.push_back(train_step(p, clip, state, cfg).loss);
    return std::make_pair(p, losses);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.second.back() < a.second.front());
}

TEST_CASE("non-finite loss aborts the step with a diagnostic") {
  IsomerConfig cfg = tiny_config();
  const Clip clip = synth_clip(cfg);
  ParamSet p = init_model(cfg);
  p.at("decoder.head.b")[0] = std::numeric_limits<double>::infinity();
  AdamWState state;
  CHECK_THROWS_WITH_AS(train_step(p, clip, state, cfg), doctest::Contains("non-finite"),
                       TrainingError);
}

TEST_CASE("metrics CSV rows") {
  std::ostringstream os;
  write_metrics_header(os);
  write_metrics_row(os, {3, 0.5, 0.25});
  CHECK(os.str() == "step,loss,iou\n3,0.5,0.25\n");
}
