#include "isomer/blocks/schema.hpp"

#include <cmath>
#include <set>

namespace isomer::blocks {

namespace {

void add_linear(std::vector<ParamSpec>& out, const std::string& w, const std::string& b,
                std::size_t in, std::size_t outdim) {
  out.push_back({w, {in, outdim}, Init::kWeight, in});
  out.push_back({b, {outdim}, Init::kBias, in});
}

void add_norm(std::vector<ParamSpec>& out, const std::string& prefix, std::size_t c) {
  out.push_back({prefix + "gamma", {c}, Init::kOnes, 0});
  out.push_back({prefix + "beta", {c}, Init::kZeros, 0});
}

}  // namespace

std::vector<ParamSpec> block_schema(BlockKind kind, const BlockConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.channels;
  std::vector<ParamSpec> s;
  add_norm(s, "ln1.", c);
  add_norm(s, "ln2.", c);
  if (kind == BlockKind::kVanilla || kind == BlockKind::kSgst) {
    for (const char* n : {"q", "k", "v", "o"}) {
      if (n[0] == 'k') {
        s.push_back({"attn.wk", {c, c}, Init::kWeight, c});
      } else {
        add_linear(s, std::string("attn.w") + n, std::string("attn.b") + n, c, c);
      }
    }
  }
  add_linear(s, "ffn.w1", "ffn.b1", c, cfg.ffn_hidden());
  add_linear(s, "ffn.w2", "ffn.b2", cfg.ffn_hidden(), c);
  if (kind == BlockKind::kCst) {
    s.push_back({"cst.wg", {c, 1}, Init::kWeight, c});
    add_linear(s, "cst.w1", "cst.b1", c, cfg.context_hidden());
    add_norm(s, "cst.ln.", cfg.context_hidden());
    add_linear(s, "cst.w2", "cst.b2", cfg.context_hidden(), c);
  }
  if (kind == BlockKind::kSgst) {
    add_linear(s, "sgst.wh", "sgst.bh", c, 1);
    s.push_back({"sgst.wm", {cfg.tokens, cfg.merged_tokens()}, Init::kWeight, cfg.tokens});
  }
  return s;
}

std::vector<ParamSpec> mix_schema(std::size_t channels) {
  std::vector<ParamSpec> s;
  add_linear(s, "w", "b", 2 * channels, channels);
  return s;
}

ParamSet init_params(const std::vector<ParamSpec>& schema, Rng& rng, const std::string& prefix) {
  ParamSet out;
  for (const auto& spec : schema) {
    switch (spec.init) {
      case Init::kWeight:
      case Init::kBias: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
        out.set(prefix + spec.name, rng.uniform_array(spec.shape, -bound, bound));
        break;
      }
      case Init::kOnes:
        out.set(prefix + spec.name, DenseArray::full(spec.shape, 1.0));
        break;
      case Init::kZeros:
        out.set(prefix + spec.name, DenseArray(spec.shape));
        break;
    }
  }
  return out;
}

ParamSet zero_params(const std::vector<ParamSpec>& schema, const std::string& prefix) {
  ParamSet out;
  for (const auto& spec : schema) out.set(prefix + spec.name, DenseArray(spec.shape));
  return out;
}

void check_schema(const ParamSet& params, const std::vector<ParamSpec>& schema,
                  const std::string& prefix) {
  std::set<std::string> expected;
  for (const auto& spec : schema) {
    const std::string name = prefix + spec.name;
    expected.insert(name);
    if (!params.contains(name)) throw ConfigError("missing tensor '" + name + "'");
    const auto& have = params.at(name).shape();
    if (have != spec.shape) {
      throw ConfigError("tensor '" + name + "' has shape " + shape_to_string(have) +
                        ", expected " + shape_to_string(spec.shape));
    }
  }
  for (const auto& [name, value] : params) {
    if (name.starts_with(prefix) && !expected.contains(name)) {
      throw ConfigError("unexpected tensor '" + name + "'");
    }
  }
}

}  // namespace isomer::blocks
