#include "isomer/cli/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>

#include "isomer/blocks/blocks.hpp"
#include "isomer/blocks/schema.hpp"
#include "isomer/cost/cost.hpp"
#include "isomer/numerics/rng.hpp"

namespace isomer::cli {

using blocks::BlockKind;

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

TimingStats summarize(std::vector<double> seconds) {
  if (seconds.empty()) return {};
  std::sort(seconds.begin(), seconds.end());
  if (seconds.size() == 1) return {seconds[0], 0.0};
  return {quantile(seconds, 0.5), quantile(seconds, 0.75) - quantile(seconds, 0.25)};
}

void check_memory_cap(BlockKind kind, std::size_t tokens, std::size_t channels,
                      const BenchOptions& opts) {
  std::uint64_t need = std::uint64_t{tokens} * channels * 4;  // FFN hidden layer
  if (kind == BlockKind::kVanilla) need = std::max(need, std::uint64_t{tokens} * tokens);
  if (need > opts.max_elements) {
    throw blocks::ConfigError("bench: " + std::string(blocks::to_string(kind)) + " at N=" +
                              std::to_string(tokens) + ", C=" + std::to_string(channels) +
                              " needs " + std::to_string(need) +
                              " doubles in one intermediate, above the cap of " +
                              std::to_string(opts.max_elements));
  }
}

namespace {

struct Case {
  BlockKind kind;
  blocks::BlockConfig cfg;
  blocks::ParamSet params;
  DenseArray x;
  std::vector<double> total, attention;
};

Case make_case(BlockKind kind, std::size_t tokens, std::size_t channels, const BenchOptions& opts) {
  check_memory_cap(kind, tokens, channels, opts);
  Case c{kind, {}, {}, {}, {}, {}};
  c.cfg.tokens = tokens;
  c.cfg.channels = channels;
  c.cfg.heads = opts.heads;
  c.cfg.merge_ratio = opts.merge_ratio;
  c.cfg.validate();
  Rng rng(opts.seed);
  c.params = blocks::init_params(blocks::block_schema(kind, c.cfg), rng);
  c.x = rng.normal_array({tokens, channels});
  return c;
}

void time_once(Case& c, bool record) {
  using Clock = std::chrono::steady_clock;
  blocks::SublayerTiming timing;
  const auto t0 = Clock::now();
  const DenseArray y = blocks::block_forward(c.kind, c.x, c.params, c.cfg, nullptr, &timing);
  const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
  if (y.size() != c.x.size()) throw std::logic_error("bench: output shape changed");
  if (!record) return;
  c.total.push_back(dt);
  c.attention.push_back(timing.attention_seconds);
}

BenchRow to_row(const Case& c, const BenchOptions& opts) {
  std::size_t n_fg = 0;
  if (c.kind == BlockKind::kSgst) {
    n_fg = blocks::make_gather_plan(blocks::sgst_block_heatmap(c.x, c.params).data()).fg.size();
  }
  const auto report = cost::block_cost(c.kind, c.cfg, n_fg);
  BenchRow row;
  row.block = std::string(blocks::to_string(c.kind));
  row.tokens = c.cfg.tokens;
  row.channels = c.cfg.channels;
  // Same key columns as the cost tables.
  row.heads = report.heads;
  row.merged = report.merged;
  row.repeats = opts.repeats;
  row.forward = summarize(c.total);
  row.attention = summarize(c.attention);
  row.flops = report.total();
  row.attention_flops = report.attention_stage();
  return row;
}

// Rounds visit every block once, so slow drift of the machine (frequency,
// neighbours) lands on all blocks alike instead of on whichever runs last.
std::vector<BenchRow> bench_group(const std::vector<BlockKind>& kinds, std::size_t tokens,
                                  std::size_t channels, const BenchOptions& opts) {
  std::vector<Case> cases;
  for (auto kind : kinds) cases.push_back(make_case(kind, tokens, channels, opts));
  for (std::size_t i = 0; i < opts.warmups + opts.repeats; ++i) {
    for (auto& c : cases) time_once(c, i >= opts.warmups);
  }
  std::vector<BenchRow> rows;
  for (const auto& c : cases) rows.push_back(to_row(c, opts));
  return rows;
}

}  // namespace

BenchRow bench_block(BlockKind kind, std::size_t tokens, std::size_t channels,
                     const BenchOptions& opts) {
  return bench_group({kind}, tokens, channels, opts).front();
}

std::vector<BenchRow> run_bench(const BenchOptions& opts) {
  // Validate every configuration before spending time on any of them.
  for (auto kind : opts.blocks)
    for (auto n : opts.tokens)
      for (auto c : opts.channels) check_memory_cap(kind, n, c, opts);
  std::vector<BenchRow> rows;
  for (auto n : opts.tokens)
    for (auto c : opts.channels)
      for (auto& row : bench_group(opts.blocks, n, c, opts)) rows.push_back(std::move(row));
  return rows;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "block,N,C,heads,K,repeats,median_s,iqr_s,attention_median_s,attention_iqr_s,flops,"
        "attention_flops\n";
  char buf[320];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%zu,%zu,%.9g,%.9g,%.9g,%.9g,%llu,%llu\n",
                  r.block.c_str(), r.tokens, r.channels, r.heads, r.merged, r.repeats,
                  r.forward.median, r.forward.iqr, r.attention.median, r.attention.iqr,
                  static_cast<unsigned long long>(r.flops),
                  static_cast<unsigned long long>(r.attention_flops));
    os << buf;
  }
}

}  // namespace isomer::cli
