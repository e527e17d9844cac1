#pragma once

#include <array>
#include <cstdint>
#include <map>

#include <json.hpp>

#include "isomer/blocks/config.hpp"

namespace isomer::pipeline {

using blocks::BlockKind;
using blocks::ConfigError;

inline constexpr std::size_t kStages = 4;

/// Whole-network configuration. Stage l (1-based) works at spatial side
/// ceil(resolution / (4 * 2^(l-1))), i.e. strides 4, 8, 16, 32.
struct IsomerConfig {
  std::map<int, BlockKind> assignment = {
      {1, BlockKind::kCst}, {2, BlockKind::kCst}, {3, BlockKind::kSgst}, {4, BlockKind::kSgst}};
  std::array<std::size_t, kStages> channels = {16, 16, 16, 16};
  std::size_t heads = 1;
  std::size_t ffn_ratio = 4;
  std::size_t context_reduction = 4;
  blocks::Ratio merge_ratio{1, 9};
  blocks::MergeNorm merge_norm = blocks::MergeNorm::kSoftmax;
  bool fg_only = false;
  std::size_t decoder_width = 16;

  std::size_t resolution = 64;  // input side, multiple of 32
  std::size_t frames = 4;
  std::uint64_t data_seed = 1;
  std::uint64_t init_seed = 2;

  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t steps = 2000;

  /// Throws ConfigError naming the first problem (missing stage, bad sizes).
  void validate() const;
  BlockKind stage_kind(std::size_t stage) const;
  std::size_t stage_side(std::size_t stage) const;
  blocks::BlockConfig stage_config(std::size_t stage) const;
};

/// Parses "cst,cst,sgst,sgst" (stages 1..4).
std::map<int, BlockKind> parse_assignment(std::string_view text);
std::string assignment_to_string(const std::map<int, BlockKind>& a);

nlohmann::json to_json(const IsomerConfig& cfg);
/// Keys absent from `j` keep their current values in `base`; unknown keys
/// are rejected.
IsomerConfig config_from_json(const nlohmann::json& j, IsomerConfig base = {});

/// Smallest end-to-end configuration: stage sides 8, 4, 2, 1.
IsomerConfig tiny_config();

}  // namespace isomer::pipeline
