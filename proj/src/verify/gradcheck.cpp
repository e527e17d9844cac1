#include "isomer/verify/gradcheck.hpp"

#include <cmath>
#include <cstdio>

#include "isomer/blocks/blocks.hpp"
#include "isomer/blocks/schema.hpp"
#include "isomer/numerics/rng.hpp"
#include "isomer/pipeline/model.hpp"
#include "isomer/pipeline/synth.hpp"

namespace isomer::verify {

using blocks::BlockKind;
using blocks::ParamSet;

namespace {

std::string coord(const std::string& name, std::size_t i) {
  return name + "[" + std::to_string(i) + "]";
}

// sum(r * (y - y0)). The constant offset leaves the gradient unchanged but
// keeps the summed value small, so its last-bit rounding does not swamp
// central differences of near-zero gradients.
double weighted_sum(const DenseArray& r, const DenseArray& y, const DenseArray& y0) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * (y[i] - y0[i]);
  return s;
}

double bce_term(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

bool has(const std::string& name, const char* part) { return name.find(part) != std::string::npos; }

void append_signs(const DenseArray& pre, std::vector<bool>& out) {
  for (std::size_t i = 0; i < pre.size(); ++i) out.push_back(pre[i] > 0.0);
}

void append_ffn(const blocks::FfnCache& c, Signature& sig) { append_signs(c.hidden_pre, sig.kinks); }

}  // namespace

void append_signature(const blocks::BlockCache& cache, Signature& sig) {
  constexpr std::size_t kSep = static_cast<std::size_t>(-1);
  if (const auto* v = std::get_if<blocks::VanillaCache>(&cache)) {
    append_ffn(v->ffn, sig);
  } else if (const auto* c = std::get_if<blocks::CstCache>(&cache)) {
    append_signs(c->context.norm.out, sig.kinks);
    append_ffn(c->ffn, sig);
  } else if (const auto* g = std::get_if<blocks::SgstCache>(&cache)) {
    sig.routing.insert(sig.routing.end(), g->plan.fg.begin(), g->plan.fg.end());
    sig.routing.push_back(kSep);
    for (const auto& b : g->branches)
      if (b.active) append_ffn(b.branch.ffn, sig);
  }
}

void condition_point(ParamSet& params, Rng& rng) {
  for (auto& [name, t] : params) {
    if (has(name, "gamma")) {
      t = rng.uniform_array(t.shape(), 0.5, 1.5);
    } else if (has(name, "beta") || t.rank() == 1) {
      t = rng.uniform_array(t.shape(), -0.5, 0.5);
    } else if (has(name, "sgst.wm") || has(name, "cst.wg")) {
      t = rng.uniform_array(t.shape(), -4.0, 4.0);
    }
  }
}

CheckReport run_grad_check(const std::string& name, const GradProblem& problem,
                           const GradCheckOptions& opts) {
  CheckReport r;
  r.name = name;
  r.tolerance = opts.tolerance;
  r.pass = true;

  Signature base_sig;
  const double base = problem.eval(problem.tensors, &base_sig);
  if (!std::isfinite(base)) {
    r.pass = false;
    r.detail = "non-finite loss at the unperturbed point";
    return r;
  }
  const ParamSet grads = problem.analytic(problem.tensors);

  ParamSet probe = problem.tensors;
  Signature sig;
  std::size_t fragile = 0;
  std::size_t kinks = 0;
  double worst = -1.0;
  for (const auto& [tname, value] : problem.tensors) {
    DenseArray& t = probe.at(tname);
    const DenseArray& a = grads.at(tname);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double orig = t[i];
      t[i] = orig + opts.h;
      const double fp = problem.eval(probe, &sig);
      bool routed = sig.routing != base_sig.routing;
      bool kinked = sig.kinks != base_sig.kinks;
      t[i] = orig - opts.h;
      const double fm = problem.eval(probe, &sig);
      routed = routed || sig.routing != base_sig.routing;
      kinked = kinked || sig.kinks != base_sig.kinks;
      t[i] = orig;
      ++r.cases;
      if (routed) {
        r.excluded.push_back(coord(tname, i) + " routing-fragile");
        ++fragile;
        continue;
      }
      if (kinked) {
        r.excluded.push_back(coord(tname, i) + " relu-kink");
        ++kinks;
        continue;
      }
      const double num = (fp - fm) / (2.0 * opts.h);
      if (!std::isfinite(num) || !std::isfinite(a[i])) {
        r.pass = false;
        r.detail = "non-finite gradient at " + coord(tname, i);
        return r;
      }
      const double abs_err = std::abs(a[i] - num);
      const double rel = abs_err / std::max({std::abs(a[i]), std::abs(num), opts.floor});
      r.max_abs_err = std::max(r.max_abs_err, abs_err);
      if (rel > worst) {
        worst = rel;
        r.max_rel_err = rel;
        char buf[160];
        std::snprintf(buf, sizeof buf, "worst at %s analytic=%.6e numeric=%.6e",
                      coord(tname, i).c_str(), a[i], num);
        r.detail = buf;
      }
    }
  }
  r.pass = r.max_rel_err < opts.tolerance;
  if (fragile) r.detail += " routing-fragile=" + std::to_string(fragile);
  if (kinks) r.detail += " relu-kink=" + std::to_string(kinks);
  return r;
}

blocks::BlockConfig gradcheck_block_config(BlockKind kind) {
  blocks::BlockConfig cfg;
  cfg.tokens = 9;
  cfg.channels = 8;
  cfg.heads = kind == BlockKind::kCst ? 1 : 2;
  cfg.ffn_ratio = 2;
  cfg.context_reduction = 2;
  cfg.merge_ratio = {4, 9};
  return cfg;
}

GradProblem block_grad_problem(BlockKind kind, const blocks::BlockConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  ParamSet params = blocks::init_params(blocks::block_schema(kind, cfg), rng);
  condition_point(params, rng);
  return block_grad_problem(kind, cfg, seed, std::move(params));
}

GradProblem block_grad_problem(BlockKind kind, const blocks::BlockConfig& cfg, std::uint64_t seed,
                               ParamSet params) {
  Rng rng(seed ^ 0x5bd1e995u);
  const DenseArray x = rng.normal_array({cfg.tokens, cfg.channels});
  const DenseArray weights = rng.normal_array({cfg.tokens, cfg.channels});

  GradProblem g;
  g.tensors = std::move(params);
  g.tensors.set("x", x);
  const DenseArray y0 = blocks::block_forward(kind, g.tensors.at("x"), g.tensors, cfg);
  g.eval = [kind, cfg, weights, y0](const ParamSet& t, Signature* sig) {
    blocks::BlockCache cache;
    const DenseArray y = blocks::block_forward(kind, t.at("x"), t, cfg, &cache);
    if (sig) {
      *sig = {};
      append_signature(cache, *sig);
    }
    return weighted_sum(weights, y, y0);
  };
  g.analytic = [kind, cfg, weights](const ParamSet& t) {
    blocks::BlockCache cache;
    blocks::block_forward(kind, t.at("x"), t, cfg, &cache);
    ParamSet grads = t.zeros_like();
    const DenseArray dx = blocks::block_backward(kind, cache, weights, t, cfg, grads);
    grads.at("x") = dx;
    return grads;
  };
  return g;
}

GradProblem mix_grad_problem(std::size_t tokens, std::size_t channels, std::uint64_t seed) {
  Rng rng(seed);
  GradProblem g;
  g.tensors = blocks::init_params(blocks::mix_schema(channels), rng);
  g.tensors.set("appearance", rng.normal_array({tokens, channels}));
  g.tensors.set("motion", rng.normal_array({tokens, channels}));
  const DenseArray weights = rng.normal_array({tokens, channels});
  const DenseArray y0 = blocks::mix(g.tensors.at("appearance"), g.tensors.at("motion"), g.tensors);
  g.eval = [weights, y0](const ParamSet& t, Signature* sig) {
    if (sig) *sig = {};
    return weighted_sum(weights, blocks::mix(t.at("appearance"), t.at("motion"), t), y0);
  };
  g.analytic = [weights](const ParamSet& t) {
    blocks::MixCache cache;
    blocks::mix(t.at("appearance"), t.at("motion"), t, &cache);
    ParamSet grads = t.zeros_like();
    auto d = blocks::mix_backward(cache, weights, t, grads);
    grads.at("appearance") = d.dappearance;
    grads.at("motion") = d.dmotion;
    return grads;
  };
  return g;
}

GradProblem pipeline_grad_problem(const pipeline::IsomerConfig& base, std::uint64_t seed) {
  pipeline::IsomerConfig cfg = base;
  cfg.frames = 1;
  cfg.data_seed = seed;
  cfg.init_seed = seed + 1;
  const pipeline::Clip clip = pipeline::synth_clip(cfg);
  const pipeline::Frame frame = clip.frames.front();

  GradProblem g;
  g.tensors = pipeline::init_model(cfg);
  Rng rng(seed);
  condition_point(g.tensors, rng);
  // Mean BCE minus its value at the base point, summed per pixel.
  const DenseArray z0 = pipeline::forward_frame(frame, g.tensors, cfg).logits;
  g.eval = [cfg, frame, z0](const ParamSet& t, Signature* sig) {
    pipeline::FrameCache cache;
    const auto out = pipeline::forward_frame(frame, t, cfg, &cache);
    if (sig) {
      *sig = {};
      for (const auto& stage : cache.fuse.stages) append_signature(stage.block, *sig);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < z0.size(); ++i) {
      const double y = frame.target[i];
      s += bce_term(out.logits[i], y) - bce_term(z0[i], y);
    }
    return s / static_cast<double>(z0.size());
  };
  g.analytic = [cfg, frame](const ParamSet& t) {
    pipeline::FrameCache cache;
    const auto out = pipeline::forward_frame(frame, t, cfg, &cache);
    ParamSet grads = t.zeros_like();
    pipeline::backward_frame(cache, out, frame, t, cfg, grads);
    return grads;
  };
  return g;
}

CheckReport grad_check_block(BlockKind kind, const blocks::BlockConfig& cfg, std::uint64_t seed,
                             const GradCheckOptions& opts) {
  CheckReport r = run_grad_check("gradients." + std::string(blocks::to_string(kind)),
                                 block_grad_problem(kind, cfg, seed), opts);
  r.seed = seed;
  r.config = {{"block", std::string(blocks::to_string(kind))},
              {"tokens", cfg.tokens},
              {"channels", cfg.channels},
              {"heads", cfg.heads},
              {"K", cfg.merged_tokens()},
              {"h", opts.h}};
  return r;
}

CheckReport grad_check_mix(std::uint64_t seed, const GradCheckOptions& opts) {
  CheckReport r = run_grad_check("gradients.mix", mix_grad_problem(9, 8, seed), opts);
  r.seed = seed;
  r.config = {{"tokens", 9}, {"channels", 8}, {"h", opts.h}};
  return r;
}

CheckReport grad_check_pipeline(const pipeline::IsomerConfig& cfg, std::uint64_t seed,
                                const GradCheckOptions& opts) {
  CheckReport r = run_grad_check("gradients.pipeline", pipeline_grad_problem(cfg, seed), opts);
  r.seed = seed;
  r.config = pipeline::to_json(cfg);
  r.config["h"] = opts.h;
  return r;
}

}  // namespace isomer::verify
