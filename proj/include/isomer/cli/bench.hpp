#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "isomer/blocks/config.hpp"

namespace isomer::cli {

struct BenchOptions {
  std::vector<blocks::BlockKind> blocks = {blocks::BlockKind::kVanilla, blocks::BlockKind::kCst,
                                           blocks::BlockKind::kSgst};
  std::vector<std::size_t> tokens = {4096};
  std::vector<std::size_t> channels = {256};
  std::size_t heads = 1;
  blocks::Ratio merge_ratio{1, 9};
  std::size_t repeats = 11;
  std::size_t warmups = 3;
  std::uint64_t seed = 1;
  /// Refuse any (block, N, C) whose largest intermediate (N*C, or N*N for
  /// vanilla attention) exceeds this many doubles.
  std::uint64_t max_elements = std::uint64_t{1} << 25;  // 256 MiB
};

struct TimingStats {
  double median = 0.0;
  double iqr = 0.0;  // 0 for a single repeat
};

/// Median and interquartile range with linear interpolation between order
/// statistics.
TimingStats summarize(std::vector<double> seconds);

struct BenchRow {
  std::string block;
  std::size_t tokens = 0;
  std::size_t channels = 0;
  std::size_t heads = 0;
  std::size_t merged = 0;  // K, 0 unless SGST
  std::size_t repeats = 0;
  TimingStats forward;     // whole block
  TimingStats attention;   // attention stage (block minus FFN sub-layer)
  std::uint64_t flops = 0;            // analytic, whole block
  std::uint64_t attention_flops = 0;  // analytic, attention stage
};

/// Throws blocks::ConfigError when a configuration exceeds the memory cap.
void check_memory_cap(blocks::BlockKind kind, std::size_t tokens, std::size_t channels,
                      const BenchOptions& opts);

/// Times block forwards on random tokens; warmups are run and discarded.
BenchRow bench_block(blocks::BlockKind kind, std::size_t tokens, std::size_t channels,
                     const BenchOptions& opts);
std::vector<BenchRow> run_bench(const BenchOptions& opts);

/// Header: block,N,C,heads,K,repeats,median_s,iqr_s,attention_median_s,
/// attention_iqr_s,flops,attention_flops
void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows);

}  // namespace isomer::cli
