#include "isomer/pipeline/train.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "isomer/numerics/ops.hpp"

namespace isomer::pipeline {

AdamWOptions AdamWOptions::from(const IsomerConfig& cfg) {
  return {cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay};
}

void adamw_update(ParamSet& params, const ParamSet& grads, AdamWState& state,
                  const AdamWOptions& opt) {
  if (state.step == 0 && state.m.size() == 0) {
    state.m = params.zeros_like();
    state.v = params.zeros_like();
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (auto& [name, p] : params) {
    const DenseArray& g = grads.at(name);
    DenseArray& m = state.m.at(name);
    DenseArray& v = state.v.at(name);
    if (g.shape() != p.shape()) {
      throw DimensionError("adamw: gradient for '" + name + "' has shape " +
                           shape_to_string(g.shape()));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= opt.lr * (mhat / (std::sqrt(vhat) + opt.eps) + opt.weight_decay * p[i]);
    }
  }
}

ParamSet clip_gradient(const ParamSet& params, const Clip& clip, const IsomerConfig& cfg,
                       double* loss) {
  ParamSet grads = params.zeros_like();
  const double w = 1.0 / static_cast<double>(clip.frames.size());
  double total = 0.0;
  for (const Frame& f : clip.frames) {
    FrameCache cache;
    const FrameOutput out = forward_frame(f, params, cfg, &cache);
    total += out.loss * w;
    backward_frame(cache, out, f, params, cfg, grads, w);
  }
  if (loss) *loss = total;
  return grads;
}

StepResult train_step(ParamSet& params, const Clip& clip, AdamWState& state,
                      const IsomerConfig& cfg) {
  if (clip.frames.empty()) throw TrainingError("train_step: empty clip");
  ParamSet grads = params.zeros_like();
  const double w = 1.0 / static_cast<double>(clip.frames.size());
  StepResult r;
  for (std::size_t t = 0; t < clip.frames.size(); ++t) {
    const Frame& f = clip.frames[t];
    FrameCache cache;
    const FrameOutput out = forward_frame(f, params, cfg, &cache);
    if (!std::isfinite(out.loss)) {
      throw TrainingError("non-finite loss " + std::to_string(out.loss) + " on frame " +
                          std::to_string(t) + " at optimizer step " +
                          std::to_string(state.step + 1));
    }
    r.loss += out.loss * w;
    r.iou += iou(out.logits, f.target) * w;
    backward_frame(cache, out, f, params, cfg, grads, w);
  }
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) {
      throw TrainingError("non-finite gradient for '" + name + "' at optimizer step " +
                          std::to_string(state.step + 1));
    }
  }
  adamw_update(params, grads, state, AdamWOptions::from(cfg));
  return r;
}

EvalResult evaluate(const ParamSet& params, const Clip& clip, const IsomerConfig& cfg) {
  EvalResult r;
  for (const Frame& f : clip.frames) {
    const FrameOutput out = forward_frame(f, params, cfg);
    r.frame_iou.push_back(iou(out.logits, f.target));
    r.loss += out.loss;
  }
  const double n = static_cast<double>(clip.frames.size());
  for (double v : r.frame_iou) r.mean_iou += v;
  r.mean_iou /= n;
  r.loss /= n;
  return r;
}

TrainResult train(const IsomerConfig& cfg, const std::function<void(const MetricsRow&)>& on_step) {
  cfg.validate();
  const Clip clip = synth_clip(cfg);
  TrainResult result;
  result.params = init_model(cfg);
  AdamWState state;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const StepResult s = train_step(result.params, clip, state, cfg);
    const MetricsRow row{step, s.loss, s.iou};
    result.metrics.push_back(row);
    if (on_step) on_step(row);
  }
  result.final_eval = evaluate(result.params, clip, cfg);
  return result;
}

void write_metrics_header(std::ostream& os) { os << "step,loss,iou\n"; }

void write_metrics_row(std::ostream& os, const MetricsRow& row) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", row.step, row.loss, row.iou);
  os << buf;
}

}  // namespace isomer::pipeline
