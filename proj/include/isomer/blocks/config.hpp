#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace isomer::blocks {

/// Invalid or inconsistent configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class BlockKind { kVanilla, kCst, kSgst };

std::string_view to_string(BlockKind kind);
/// Accepts "vt", "vanilla", "cst", "sgst" (case-insensitive).
BlockKind parse_block_kind(std::string_view text);

/// Column normalization applied to the merge matrix before merging.
enum class MergeNorm { kSoftmax, kRaw };

std::string_view to_string(MergeNorm norm);
MergeNorm parse_merge_norm(std::string_view text);

/// Exact rational K/N.
struct Ratio {
  std::uint64_t num = 1;
  std::uint64_t den = 9;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string to_string() const;
  /// Parses "1/9", "4/9", "1".
  static Ratio parse(std::string_view text);
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

struct BlockConfig {
  std::size_t channels = 8;           // C
  std::size_t tokens = 16;            // N = H * W
  std::size_t heads = 1;
  std::size_t ffn_ratio = 4;          // FFN hidden width = ffn_ratio * C
  std::size_t context_reduction = 4;  // CST channel transform width = C / r_c
  Ratio merge_ratio{1, 9};            // K / N for SGST soft merging
  MergeNorm merge_norm = MergeNorm::kSoftmax;
  bool fg_only = false;               // SGST: background tokens bypass the block

  /// K = ceil(merge_ratio * N), never below 1.
  std::size_t merged_tokens() const;
  std::size_t head_dim() const { return channels / heads; }
  std::size_t ffn_hidden() const { return ffn_ratio * channels; }
  std::size_t context_hidden() const { return channels / context_reduction; }

  /// Throws ConfigError when any field is inconsistent.
  void validate() const;
};

}  // namespace isomer::blocks
