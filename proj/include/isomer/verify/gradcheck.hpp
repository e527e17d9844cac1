#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "isomer/blocks/blocks.hpp"
#include "isomer/blocks/config.hpp"
#include "isomer/blocks/params.hpp"
#include "isomer/numerics/rng.hpp"
#include "isomer/pipeline/config.hpp"
#include "isomer/verify/report.hpp"

namespace isomer::verify {

struct GradCheckOptions {
  double h = 1e-5;
  double tolerance = 1e-4;  // relative
  double floor = 1e-8;      // denominator floor of the relative error
};

/// Discrete state of a forward pass. Finite differences are only valid when
/// both probes keep it unchanged.
struct Signature {
  std::vector<std::size_t> routing;  // SGST foreground lists
  std::vector<bool> kinks;           // sign of every ReLU input
  friend bool operator==(const Signature&, const Signature&) = default;
};

void append_signature(const blocks::BlockCache& cache, Signature& sig);

/// One differentiable scalar problem. `eval` returns the loss and fills the
/// signature; `analytic` returns d(loss)/d(each tensor) for the unperturbed
/// tensors.
struct GradProblem {
  blocks::ParamSet tensors;
  std::function<double(const blocks::ParamSet&, Signature*)> eval;
  std::function<blocks::ParamSet(const blocks::ParamSet&)> analytic;
};

/// Central differences for every coordinate of every tensor against the
/// analytic gradient. Coordinates whose +h or -h probe changes the routing
/// (routing-fragile) or flips a ReLU input (kink) are not compared; they
/// are listed in `excluded` with the reason.
CheckReport run_grad_check(const std::string& name, const GradProblem& problem,
                           const GradCheckOptions& opts = {});

/// Moves freshly initialized parameters to a well-conditioned check point:
/// unit-scale norm gains and biases, spread-out merge and context heads.
/// Near-uniform softmaxes at initialization leave
/// some gradients within roundoff of zero, which central differences cannot
/// resolve.
void condition_point(blocks::ParamSet& params, Rng& rng);

/// Small block configuration used by the gradient suite.
blocks::BlockConfig gradcheck_block_config(blocks::BlockKind kind);

/// Loss sum(R * block(x)) with fixed random R. Tensors: every parameter plus
/// the input "x".
GradProblem block_grad_problem(blocks::BlockKind kind, const blocks::BlockConfig& cfg,
                               std::uint64_t seed);
/// Same, with parameters supplied by the caller (e.g. all zero).
GradProblem block_grad_problem(blocks::BlockKind kind, const blocks::BlockConfig& cfg,
                               std::uint64_t seed, blocks::ParamSet params);
GradProblem mix_grad_problem(std::size_t tokens, std::size_t channels, std::uint64_t seed);
/// BCE loss of one synthetic frame through the full pipeline; tensors are
/// the model parameters.
GradProblem pipeline_grad_problem(const pipeline::IsomerConfig& cfg, std::uint64_t seed);

CheckReport grad_check_block(blocks::BlockKind kind, const blocks::BlockConfig& cfg,
                             std::uint64_t seed, const GradCheckOptions& opts = {});
CheckReport grad_check_mix(std::uint64_t seed, const GradCheckOptions& opts = {});
CheckReport grad_check_pipeline(const pipeline::IsomerConfig& cfg, std::uint64_t seed,
                                const GradCheckOptions& opts = {});

}  // namespace isomer::verify
