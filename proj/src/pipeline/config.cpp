#include "isomer/pipeline/config.hpp"

#include <sstream>

namespace isomer::pipeline {

void IsomerConfig::validate() const {
  for (int l = 1; l <= static_cast<int>(kStages); ++l) {
    if (!assignment.contains(l)) {
      throw ConfigError("stage " + std::to_string(l) + " has no block assignment");
    }
  }
  for (const auto& [stage, kind] : assignment) {
    if (stage < 1 || stage > static_cast<int>(kStages)) {
      throw ConfigError("assignment names stage " + std::to_string(stage) + ", expected 1..4");
    }
  }
  if (resolution == 0 || resolution % 32 != 0) {
    throw ConfigError("resolution must be a positive multiple of 32, got " +
                      std::to_string(resolution));
  }
  if (frames == 0) throw ConfigError("frames must be positive");
  if (decoder_width == 0) throw ConfigError("decoder_width must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("betas must lie in [0, 1)");
  }
  if (!(eps > 0.0) || !(weight_decay >= 0.0)) throw ConfigError("eps/weight_decay out of range");
  for (std::size_t l = 1; l <= kStages; ++l) {
    try {
      stage_config(l).validate();
    } catch (const ConfigError& e) {
      throw ConfigError("stage " + std::to_string(l) + ": " + e.what());
    }
  }
}

BlockKind IsomerConfig::stage_kind(std::size_t stage) const {
  const auto it = assignment.find(static_cast<int>(stage));
  if (it == assignment.end()) {
    throw ConfigError("stage " + std::to_string(stage) + " has no block assignment");
  }
  return it->second;
}

std::size_t IsomerConfig::stage_side(std::size_t stage) const {
  const std::size_t stride = std::size_t{4} << (stage - 1);
  return (resolution + stride - 1) / stride;
}

blocks::BlockConfig IsomerConfig::stage_config(std::size_t stage) const {
  blocks::BlockConfig b;
  b.channels = channels.at(stage - 1);
  const std::size_t side = stage_side(stage);
  b.tokens = side * side;
  b.heads = heads;
  b.ffn_ratio = ffn_ratio;
  b.context_reduction = context_reduction;
  b.merge_ratio = merge_ratio;
  b.merge_norm = merge_norm;
  b.fg_only = fg_only;
  return b;
}

std::map<int, BlockKind> parse_assignment(std::string_view text) {
  std::map<int, BlockKind> out;
  std::string item;
  std::istringstream in{std::string(text)};
  int stage = 1;
  while (std::getline(in, item, ',')) {
    out[stage++] = blocks::parse_block_kind(item);
  }
  if (out.size() != kStages) {
    throw ConfigError("assignment '" + std::string(text) + "' must name 4 stages");
  }
  return out;
}

std::string assignment_to_string(const std::map<int, BlockKind>& a) {
  std::string s;
  for (const auto& [stage, kind] : a) {
    if (!s.empty()) s += ',';
    s += blocks::to_string(kind);
  }
  return s;
}

nlohmann::json to_json(const IsomerConfig& c) {
  return {
      {"assignment", assignment_to_string(c.assignment)},
      {"channels", c.channels},
      {"heads", c.heads},
      {"ffn_ratio", c.ffn_ratio},
      {"context_reduction", c.context_reduction},
      {"merge_ratio", c.merge_ratio.to_string()},
      {"merge_norm", std::string(blocks::to_string(c.merge_norm))},
      {"fg_only", c.fg_only},
      {"decoder_width", c.decoder_width},
      {"resolution", c.resolution},
      {"frames", c.frames},
      {"data_seed", c.data_seed},
      {"init_seed", c.init_seed},
      {"lr", c.lr},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"eps", c.eps},
      {"weight_decay", c.weight_decay},
      {"steps", c.steps},
  };
}

IsomerConfig config_from_json(const nlohmann::json& j, IsomerConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "assignment") {
        if (v.is_string()) {
          c.assignment = parse_assignment(v.get<std::string>());
        } else {
          c.assignment.clear();
          for (const auto& [stage, kind] : v.items()) {
            c.assignment[std::stoi(stage)] = blocks::parse_block_kind(kind.get<std::string>());
          }
        }
      } else if (key == "channels") {
        if (v.is_number()) {
          c.channels.fill(v.get<std::size_t>());
        } else {
          c.channels = v.get<std::array<std::size_t, kStages>>();
        }
      } else if (key == "heads") {
        c.heads = v.get<std::size_t>();
      } else if (key == "ffn_ratio") {
        c.ffn_ratio = v.get<std::size_t>();
      } else if (key == "context_reduction") {
        c.context_reduction = v.get<std::size_t>();
      } else if (key == "merge_ratio") {
        c.merge_ratio = blocks::Ratio::parse(v.get<std::string>());
      } else if (key == "merge_norm") {
        c.merge_norm = blocks::parse_merge_norm(v.get<std::string>());
      } else if (key == "fg_only") {
        c.fg_only = v.get<bool>();
      } else if (key == "decoder_width") {
        c.decoder_width = v.get<std::size_t>();
      } else if (key == "resolution") {
        c.resolution = v.get<std::size_t>();
      } else if (key == "frames") {
        c.frames = v.get<std::size_t>();
      } else if (key == "data_seed") {
        c.data_seed = v.get<std::uint64_t>();
      } else if (key == "init_seed") {
        c.init_seed = v.get<std::uint64_t>();
      } else if (key == "lr") {
        c.lr = v.get<double>();
      } else if (key == "beta1") {
        c.beta1 = v.get<double>();
      } else if (key == "beta2") {
        c.beta2 = v.get<double>();
      } else if (key == "eps") {
        c.eps = v.get<double>();
      } else if (key == "weight_decay") {
        c.weight_decay = v.get<double>();
      } else if (key == "steps") {
        c.steps = v.get<std::size_t>();
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

IsomerConfig tiny_config() {
  IsomerConfig c;
  c.resolution = 32;
  c.channels = {8, 8, 8, 8};
  c.decoder_width = 8;
  // Keeps the CST context transform 4 wide; a layer norm over 2 values is
  // nearly constant and passes almost no gradient.
  c.context_reduction = 2;
  c.frames = 1;
  return c;
}

}  // namespace isomer::pipeline
