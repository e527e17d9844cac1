#include "isomer/blocks/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace isomer::blocks {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::uint64_t parse_u64(std::string_view s, std::string_view whole) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("bad ratio '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::kVanilla:
      return "vt";
    case BlockKind::kCst:
      return "cst";
    case BlockKind::kSgst:
      return "sgst";
  }
  return "?";
}

BlockKind parse_block_kind(std::string_view text) {
  const auto s = lower(text);
  if (s == "vt" || s == "vanilla") return BlockKind::kVanilla;
  if (s == "cst") return BlockKind::kCst;
  if (s == "sgst") return BlockKind::kSgst;
  throw ConfigError("unknown block kind '" + std::string(text) + "'");
}

std::string_view to_string(MergeNorm norm) {
  return norm == MergeNorm::kSoftmax ? "softmax" : "raw";
}

MergeNorm parse_merge_norm(std::string_view text) {
  const auto s = lower(text);
  if (s == "softmax") return MergeNorm::kSoftmax;
  if (s == "raw") return MergeNorm::kRaw;
  throw ConfigError("unknown merge normalization '" + std::string(text) + "'");
}

std::string Ratio::to_string() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

Ratio Ratio::parse(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return Ratio{parse_u64(text, text), 1};
  return Ratio{parse_u64(text.substr(0, slash), text), parse_u64(text.substr(slash + 1), text)};
}

std::size_t BlockConfig::merged_tokens() const {
  const std::uint64_t k = (merge_ratio.num * tokens + merge_ratio.den - 1) / merge_ratio.den;
  return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

void BlockConfig::validate() const {
  if (channels == 0) throw ConfigError("channels must be positive");
  if (tokens == 0) throw ConfigError("tokens must be positive");
  if (heads == 0 || channels % heads != 0) {
    throw ConfigError("channels (" + std::to_string(channels) + ") must be divisible by heads (" +
                      std::to_string(heads) + ")");
  }
  if (ffn_ratio == 0) throw ConfigError("ffn_ratio must be positive");
  if (context_reduction == 0 || channels % context_reduction != 0) {
    throw ConfigError("channels (" + std::to_string(channels) +
                      ") must be divisible by context_reduction (" +
                      std::to_string(context_reduction) + ")");
  }
  if (merge_ratio.num == 0 || merge_ratio.den == 0 || merge_ratio.num > merge_ratio.den) {
    throw ConfigError("merge_ratio must lie in (0, 1], got " + merge_ratio.to_string());
  }
}

}  // namespace isomer::blocks
