#include <sstream>
#include <string>

#include "doctest.h"
#include "isomer/cost/cost.hpp"

using namespace isomer;
using namespace isomer::cost;

namespace {

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char ch : s) n += ch == '\n';
  return n;
}

}  // namespace

TEST_CASE("vanilla projection and attention-core counts at N=256, C=64") {
  const CostReport r = flops_mhsa(256, 64, 1);
  CHECK(r.item("projections") == 8388608);
  CHECK(r.item("attention_core") == 16777216);
  CHECK(r.total() >= r.item("projections") + r.item("attention_core"));
}

TEST_CASE("single-token vanilla attention core") {
  CHECK(flops_mhsa(1, 64, 1).item("attention_core") == 2 * 2 * 64);
}

TEST_CASE("attention core scales quadratically in N") {
  for (std::size_t n : {3, 64, 1000}) {
    CHECK(flops_mhsa(2 * n, 32, 2).item("attention_core") ==
          4 * flops_mhsa(n, 32, 2).item("attention_core"));
  }
}

TEST_CASE("CST context path is linear in N") {
  const auto a = flops_cst(512, 64, 4), b = flops_cst(1024, 64, 4);
  for (const char* item : {"spatial_head", "spatial_softmax", "context_pooling", "broadcast_add"}) {
    CHECK(b.item(item) == 2 * a.item(item));
  }
  CHECK(b.item("spatial_head") == 2 * 1024 * 64);
  CHECK(b.item("context_pooling") == 2 * 1024 * 64);
  CHECK(b.item("broadcast_add") == 1024 * 64);
}

TEST_CASE("CST context path is below 1% of vanilla MHSA at N=1024, C=256") {
  const auto cst = flops_cst(1024, 256, 4);
  const auto vt = flops_mhsa(1024, 256, 1);
  const double path = static_cast<double>(cst.total() - cst.item("norm1"));
  CHECK(path < 0.01 * static_cast<double>(vt.total() - vt.item("norm1")));
}

TEST_CASE("context reduction changes only the channel transform") {
  const auto a = flops_cst(256, 64, 1), b = flops_cst(256, 64, 4);
  REQUIRE(a.items.size() == b.items.size());
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    if (a.items[i].name == "channel_transform") {
      CHECK(a.items[i].flops != b.items[i].flops);
    } else {
      CHECK(a.items[i].flops == b.items[i].flops);
    }
  }
}

TEST_CASE("SGST closed-form items") {
  const std::size_t n = 1024, c = 256, k = 114;
  const auto r = flops_sgst(n, c, 1, k, 400);
  CHECK(r.item("heatmap_head") == 2 * n * c);
  CHECK(r.item("merge") == 2 * 2 * n * k * c);
  CHECK(r.item("q_projection") == 2 * n * c * c);
  CHECK(r.item("kv_projection") == 2 * 2 * 2 * k * c * c);
  CHECK(r.item("attention_core") == 2 * 2 * n * k * c);
  CHECK(r.item("o_projection") == 2 * n * c * c);
}

TEST_CASE("SGST with K = N has the vanilla attention core") {
  for (std::size_t n : {16, 256}) {
    CHECK(flops_sgst(n, 64, 1, n, n / 3).item("attention_core") ==
          flops_mhsa(n, 64, 1).item("attention_core"));
  }
}

TEST_CASE("SGST attention core does not depend on the foreground split") {
  const auto base = flops_sgst(256, 64, 2, 29, 0).item("attention_core");
  for (std::size_t nf : {1, 100, 255, 256}) {
    CHECK(flops_sgst(256, 64, 2, 29, nf).item("attention_core") == base);
  }
}

TEST_CASE("foreground-only SGST skips the background branch") {
  const auto both = flops_sgst(100, 16, 1, 12, 40, false);
  const auto fg = flops_sgst(100, 16, 1, 12, 40, true);
  CHECK(fg.item("attention_core") == 2 * 2 * 40 * 12 * 16);
  CHECK(fg.item("merge") * 2 == both.item("merge"));
  CHECK(flops_sgst(100, 16, 1, 12, 0, true).item("merge") == 0);
}

TEST_CASE("reports are sums of non-negative items") {
  blocks::BlockConfig cfg;
  cfg.tokens = 64;
  cfg.channels = 16;
  for (auto kind : {blocks::BlockKind::kVanilla, blocks::BlockKind::kCst, blocks::BlockKind::kSgst}) {
    const auto r = block_cost(kind, cfg, 20);
    std::uint64_t s = 0;
    for (const auto& it : r.items) s += it.flops;
    CHECK(s == r.total());
    CHECK(r.attention_stage() < r.total());
  }
  CHECK_THROWS_AS(flops_mhsa(8, 10, 3), blocks::ConfigError);
  CHECK_THROWS_AS(flops_sgst(8, 8, 1, 0, 4), blocks::ConfigError);
  CHECK_THROWS_AS(flops_sgst(8, 8, 1, 1, 9), blocks::ConfigError);
}

TEST_CASE("cost sweep is monotone in the merge ratio") {
  const auto grid = default_sweep_grid();
  CHECK(grid.tokens == std::vector<std::size_t>{16384, 4096, 1024, 256});
  const auto rows = cost_sweep(grid);
  CHECK(rows.size() == grid.tokens.size() * grid.channels.size() * (2 + grid.ratios.size()));
  for (std::size_t i = 0; i < rows.size(); i += 2 + grid.ratios.size()) {
    for (std::size_t j = 1; j < grid.ratios.size(); ++j) {
      CHECK(rows[i + 2 + j].report.total() < rows[i + 2 + j - 1].report.total());
    }
  }
}

TEST_CASE("SGST at K = N/9: attention portion shrinks by 84-90%, MHSA portion by less") {
  for (const auto& row : cost_sweep(default_sweep_grid())) {
    const auto& r = row.report;
    if (r.block != "sgst" || r.merged * 9 < r.tokens || r.merged * 9 >= r.tokens + 9) continue;
    const double attention = 1.0 - row.attention_ratio_vs_vanilla;
    CHECK(attention >= 0.84);
    CHECK(attention <= 0.90);
    // Q and output projections still run on all N tokens.
    CHECK(row.ratio_vs_vanilla > row.attention_ratio_vs_vanilla);
  }
  const auto vt = flops_mhsa(1024, 256, 1);
  const auto sg = flops_sgst(1024, 256, 1, 114, 512);
  const double u = 1024.0 * 256.0;  // N * C
  // q, o: 2 * 2NC^2; k, v: 2 branches * 2 * 2KC^2; merge and core: 2 * 2 * 2NKC.
  const double linear_and_core = 4 * u * 256 + 8 * 114.0 * 256 * 256 + 8 * u * 114;
  CHECK(static_cast<double>(sg.mhsa_portion() - sg.attention_portion()) + 4 * u * 114 ==
        doctest::Approx(linear_and_core).epsilon(1e-2));
  const double reduction = 1.0 - static_cast<double>(sg.mhsa_portion()) /
                                     static_cast<double>(vt.mhsa_portion());
  CHECK(reduction == doctest::Approx(0.6476).epsilon(1e-3));
}

TEST_CASE("sweep CSV tables") {
  const auto rows = cost_sweep(default_sweep_grid());
  std::ostringstream summary, items;
  write_summary_csv(summary, rows);
  write_items_csv(items, rows);
  CHECK(count_lines(summary.str()) == rows.size() + 1);
  CHECK(summary.str().starts_with("block,N,C,heads,K,total,"));
  std::size_t expected = 1;
  for (const auto& row : rows) expected += row.report.items.size() + 3;
  CHECK(count_lines(items.str()) == expected);
  CHECK(items.str().starts_with("block,N,C,heads,K,item,flops\n"));
}
