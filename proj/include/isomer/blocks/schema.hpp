#pragma once

#include <string>
#include <vector>

#include "isomer/blocks/config.hpp"
#include "isomer/blocks/params.hpp"
#include "isomer/numerics/rng.hpp"

namespace isomer::blocks {

enum class Init {
  kWeight,  // uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], fan_in = shape[0]
  kBias,    // same bound, fan_in taken from the paired weight
  kOnes,
  kZeros,
};

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init = Init::kWeight;
  std::size_t fan_in = 0;
};

/// Every tensor of one block, in a fixed order. Names are relative to the
/// block ("ln1.gamma", "attn.wq", "cst.wg", "sgst.wm", ...).
std::vector<ParamSpec> block_schema(BlockKind kind, const BlockConfig& cfg);
/// Appearance/motion mixing projection: "w" (2C x C) and "b" (C).
std::vector<ParamSpec> mix_schema(std::size_t channels);

/// Draws every tensor of the schema in order from `rng`.
ParamSet init_params(const std::vector<ParamSpec>& schema, Rng& rng,
                     const std::string& prefix = "");
/// Same tensors, all zero.
ParamSet zero_params(const std::vector<ParamSpec>& schema, const std::string& prefix = "");

/// Throws ConfigError naming the first tensor that is missing, unexpected,
/// or differently shaped.
void check_schema(const ParamSet& params, const std::vector<ParamSpec>& schema,
                  const std::string& prefix = "");

}  // namespace isomer::blocks
