#pragma once

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "isomer/pipeline/model.hpp"

namespace isomer::pipeline {

/// Raised when a training step produces a non-finite loss or gradient.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  static AdamWOptions from(const IsomerConfig& cfg);
};

struct AdamWState {
  ParamSet m;
  ParamSet v;
  std::uint64_t step = 0;
};

/// Decoupled weight decay:
///   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
///   p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
/// Moments are created on first use.
void adamw_update(ParamSet& params, const ParamSet& grads, AdamWState& state,
                  const AdamWOptions& opt);

struct StepResult {
  double loss = 0.0;  // mean over frames, before the update
  double iou = 0.0;   // mean over frames, before the update
};

/// One full-clip step: forward every frame, average the losses, backward,
/// AdamW update.
StepResult train_step(ParamSet& params, const Clip& clip, AdamWState& state,
                      const IsomerConfig& cfg);

/// Mean-loss gradient over the clip, without updating.
ParamSet clip_gradient(const ParamSet& params, const Clip& clip, const IsomerConfig& cfg,
                       double* loss = nullptr);

struct MetricsRow {
  std::size_t step = 0;
  double loss = 0.0;
  double iou = 0.0;
};

struct EvalResult {
  std::vector<double> frame_iou;
  double mean_iou = 0.0;
  double loss = 0.0;
};

EvalResult evaluate(const ParamSet& params, const Clip& clip, const IsomerConfig& cfg);

struct TrainResult {
  ParamSet params;
  std::vector<MetricsRow> metrics;
  EvalResult final_eval;
};

/// Trains cfg.steps steps on synth_clip(cfg) from init_model(cfg).
TrainResult train(const IsomerConfig& cfg,
                  const std::function<void(const MetricsRow&)>& on_step = {});

/// Header "step,loss,iou"; values with 17 significant digits.
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);

}  // namespace isomer::pipeline
