#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <span>
#include <sstream>

#include "doctest.h"
#include "isomer/blocks/blocks.hpp"
#include "isomer/blocks/checkpoint.hpp"
#include "isomer/blocks/schema.hpp"
#include "isomer/numerics/rng.hpp"
#include "isomer/numerics/tensor_io.hpp"

using namespace isomer;
using namespace isomer::blocks;

namespace {

BlockConfig small_config(std::size_t n = 6, std::size_t c = 8, std::size_t heads = 2) {
  BlockConfig cfg;
  cfg.tokens = n;
  cfg.channels = c;
  cfg.heads = heads;
  return cfg;
}

ParamSet random_params(BlockKind kind, const BlockConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return init_params(block_schema(kind, cfg), rng);
}

DenseArray random_tokens(std::size_t n, std::size_t c, std::uint64_t seed, double stddev = 1.0) {
  Rng rng(seed);
  return rng.normal_array({n, c}, stddev);
}

void zero_tensor(ParamSet& p, const std::string& name) { p.at(name) = DenseArray(p.at(name).shape()); }

bool rows_equal(std::span<const double> a, std::span<const double> b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

DenseArray permute_rows(const DenseArray& x, const std::vector<std::size_t>& perm) {
  return gather_rows(x, perm);
}

}  // namespace

TEST_CASE("config derives K with the ceiling rule and validates") {
  BlockConfig cfg;
  cfg.tokens = 1024;
  CHECK(cfg.merged_tokens() == 114);
  cfg.tokens = 9;
  CHECK(cfg.merged_tokens() == 1);
  cfg.tokens = 1;
  cfg.merge_ratio = {1, 36};
  CHECK(cfg.merged_tokens() == 1);
  CHECK(Ratio::parse("4/9") == Ratio{4, 9});
  CHECK(Ratio::parse("1") == Ratio{1, 1});
  CHECK_THROWS_AS(Ratio::parse("a/9"), ConfigError);
  BlockConfig bad;
  bad.channels = 6;
  bad.heads = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.heads = 2;
  bad.context_reduction = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_block_kind("VT") == BlockKind::kVanilla);
  CHECK_THROWS_AS(parse_block_kind("mlp"), ConfigError);
}

TEST_CASE("feature map token view is row-major over H then W") {
  FeatureMap f(2, 2, 3);
  for (std::size_t i = 0; i < f.data().size(); ++i) f.data()[i] = static_cast<double>(i);
  const DenseArray t = f.token_view();
  CHECK(t.shape() == Shape{6, 2});
  CHECK(t(4, 1) == f.at(1, 1, 1));
  CHECK(FeatureMap::from_tokens(t, 2, 3) == f);
}

TEST_CASE("mix with zero motion and identity first half returns appearance") {
  const std::size_t c = 4;
  ParamSet p;
  DenseArray w({2 * c, c});
  for (std::size_t i = 0; i < c; ++i) w(i, i) = 1.0;
  p.set("w", w);
  p.set("b", DenseArray({c}));
  const DenseArray app = random_tokens(5, c, 1);
  const DenseArray out = mix(app, DenseArray({5, c}), p);
  CHECK(out == app);

  Rng rng(3);
  const ParamSet rp = init_params(mix_schema(c), rng);
  const FeatureMap fa(rng.normal_array({c, 2, 3})), fm(rng.normal_array({c, 2, 3}));
  const FeatureMap mixed = mix(fa, fm, rp);
  CHECK(mixed.channels() == c);
  CHECK(mixed.height() == 2);
  CHECK(mixed.width() == 3);
  CHECK_THROWS_AS(mix(app, DenseArray({4, c}), p), DimensionError);
}

TEST_CASE("single-token attention is the value path") {
  BlockConfig cfg = small_config(1, 8, 2);
  const ParamSet p = random_params(BlockKind::kVanilla, cfg, 5);
  const DenseArray x = random_tokens(1, 8, 6);
  const ParamView attn(p, "attn.");
  for (std::size_t h = 0; h < 2; ++h) {
    const DenseArray a = attention_matrix(x, attn, 2, h);
    CHECK(a.shape() == Shape{1, 1});
    CHECK(a[0] == 1.0);
  }
  const DenseArray expected = linear(linear(x, attn["wv"], attn["bv"]), attn["wo"], attn["bo"]);
  CHECK(max_abs_diff(mhsa_forward(x, attn, 2), expected) < 1e-15);
}

TEST_CASE("attention rows sum to one") {
  const BlockConfig cfg = small_config(7, 8, 2);
  const ParamSet p = random_params(BlockKind::kVanilla, cfg, 11);
  const DenseArray a = attention_matrix(random_tokens(7, 8, 12), ParamView(p, "attn."), 2, 1);
  for (std::size_t i = 0; i < 7; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 7; ++j) s += a(i, j);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("vanilla block with zeroed sub-layers is the identity") {
  const BlockConfig cfg = small_config();
  ParamSet p = random_params(BlockKind::kVanilla, cfg, 2);
  for (const auto& n : p.names()) {
    if (n.starts_with("attn.") || n.starts_with("ffn.")) zero_tensor(p, n);
  }
  const DenseArray x = random_tokens(cfg.tokens, cfg.channels, 3);
  CHECK(vanilla_block_forward(x, p, cfg) == x);
}

TEST_CASE("blocks stay finite at input magnitude 1e3") {
  for (BlockKind kind : {BlockKind::kVanilla, BlockKind::kCst, BlockKind::kSgst}) {
    const BlockConfig cfg = small_config();
    const ParamSet p = random_params(kind, cfg, 4);
    const DenseArray x = random_tokens(cfg.tokens, cfg.channels, 5, 1e3);
    CHECK(block_forward(kind, x, p, cfg).all_finite());
    CHECK(block_forward(kind, DenseArray({cfg.tokens, cfg.channels}), p, cfg).all_finite());
  }
}

TEST_CASE("vanilla and CST blocks are token-permutation equivariant") {
  const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  for (BlockKind kind : {BlockKind::kVanilla, BlockKind::kCst}) {
    const BlockConfig cfg = small_config();
    const ParamSet p = random_params(kind, cfg, 21);
    const DenseArray x = random_tokens(cfg.tokens, cfg.channels, 22);
    const DenseArray a = permute_rows(block_forward(kind, x, p, cfg), perm);
    const DenseArray b = block_forward(kind, permute_rows(x, perm), p, cfg);
    CHECK(max_abs_diff(a, b) < 1e-12);
  }
}

TEST_CASE("SGST is permutation equivariant when W_m rows move with the tokens") {
  const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  const BlockConfig cfg = small_config();
  ParamSet p = random_params(BlockKind::kSgst, cfg, 23);
  const DenseArray x = random_tokens(cfg.tokens, cfg.channels, 24);
  const DenseArray a = permute_rows(sgst_block_forward(x, p, cfg), perm);
  ParamSet q = p;
  q.at("sgst.wm") = permute_rows(p.at("sgst.wm"), perm);
  const DenseArray b = sgst_block_forward(permute_rows(x, perm), q, cfg);
  CHECK(max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("CST global context is query independent") {
  const BlockConfig cfg = small_config(9, 8, 1);
  const ParamSet p = random_params(BlockKind::kCst, cfg, 31);
  const DenseArray x = random_tokens(9, 8, 32);
  const DenseArray out = cst_global_context(x, p);
  const DenseArray refined = cst_context(x, p);
  // The same vector is added to every token; recomputing out - x would only
  // reintroduce rounding, so the check is on the addend itself.
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 8; ++j) CHECK(out(i, j) == x(i, j) + refined[j]);
}

TEST_CASE("CST zero spatial head pools the mean token") {
  const BlockConfig cfg = small_config(5, 8, 1);
  ParamSet p = random_params(BlockKind::kCst, cfg, 33);
  zero_tensor(p, "cst.wg");
  const DenseArray x = random_tokens(5, 8, 34);
  const DenseArray g = cst_weight_map(x, p);
  for (std::size_t i = 0; i < 5; ++i) CHECK(g[i] == doctest::Approx(0.2).epsilon(1e-15));
  CstContextCache cache;
  cst_context(x, p, &cache);
  const DenseArray mean = scale(sum_rows(x), 1.0 / 5.0);
  for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(cache.context[j] - mean[j]) < 1e-14);
}

TEST_CASE("CST with zero output transform is the identity") {
  const BlockConfig cfg = small_config(5, 8, 1);
  ParamSet p = random_params(BlockKind::kCst, cfg, 35);
  zero_tensor(p, "cst.w2");
  zero_tensor(p, "cst.b2");
  const DenseArray x = random_tokens(5, 8, 36);
  CHECK(cst_global_context(x, p) == x);
}

TEST_CASE("gather plan follows the threshold with ties to the foreground") {
  const std::vector<double> h = {0.6, 0.4, 0.5, 0.1};
  const GatherPlan plan = make_gather_plan(h);
  CHECK(plan.fg == std::vector<std::size_t>{0, 2});
  CHECK(plan.bg == std::vector<std::size_t>{1, 3});
}

TEST_CASE("zero heatmap head routes every token to the foreground") {
  const BlockConfig cfg = small_config(7, 8, 1);
  ParamSet p = random_params(BlockKind::kSgst, cfg, 41);
  zero_tensor(p, "sgst.wh");
  zero_tensor(p, "sgst.bh");
  const DenseArray x = random_tokens(7, 8, 42);
  const GatherResult g = sgst_gather(x, p);
  for (double v : g.heatmap.data()) CHECK(v == 0.5);
  CHECK(g.plan.fg.size() == 7);
  CHECK(g.plan.bg.empty());
  CHECK(g.q_fg == x);
  CHECK(g.q_bg.rows() == 0);
}

TEST_CASE("gather partitions are exhaustive and disjoint") {
  Rng rng(43);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<double> h(n);
    for (auto& v : h) v = rng.below(4) == 0 ? 0.5 : rng.uniform01();
    const GatherPlan plan = make_gather_plan(h);
    REQUIRE(plan.tokens() == n);
    std::vector<int> seen(n, 0);
    for (auto i : plan.fg) ++seen[i];
    for (auto i : plan.bg) ++seen[i];
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
    CHECK(std::is_sorted(plan.fg.begin(), plan.fg.end()));
    CHECK(std::is_sorted(plan.bg.begin(), plan.bg.end()));
  }
}

TEST_CASE("softmax merge gives convex combinations of the gated tokens") {
  const std::size_t n = 10, c = 4, k = 3;
  Rng rng(51);
  const DenseArray x = rng.normal_array({n, c});
  const DenseArray wm = rng.normal_array({n, k}, 2.0);
  DenseArray h({n});
  for (std::size_t i = 0; i < n; ++i) h[i] = rng.uniform01();
  for (Branch b : {Branch::kForeground, Branch::kBackground}) {
    const DenseArray merged = sgst_soft_merge(x, h.data(), wm, b, MergeNorm::kSoftmax);
    CHECK(merged.shape() == Shape{k, c});
    const DenseArray m = merge_weights(wm, MergeNorm::kSoftmax);
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += m(i, j);
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
    const DenseArray f = branch_factor(h.data(), b);
    const DenseArray e = scale_rows(x, f.data());
    for (std::size_t ch = 0; ch < c; ++ch) {
      double lo = e(0, ch), hi = e(0, ch);
      for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, e(i, ch));
        hi = std::max(hi, e(i, ch));
      }
      for (std::size_t j = 0; j < k; ++j) {
        CHECK(merged(j, ch) >= lo - 1e-12);
        CHECK(merged(j, ch) <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("raw identity merge with unit heatmap selects the first K tokens") {
  const std::size_t n = 8, c = 3, k = 5;
  const DenseArray x = random_tokens(n, c, 52);
  DenseArray wm({n, k});
  for (std::size_t j = 0; j < k; ++j) wm(j, j) = 1.0;
  const std::vector<double> h(n, 1.0);
  const DenseArray merged = sgst_soft_merge(x, h, wm, Branch::kForeground, MergeNorm::kRaw);
  for (std::size_t j = 0; j < k; ++j) CHECK(rows_equal(merged.row(j), x.row(j)));
  CHECK_THROWS_AS(sgst_soft_merge(x, h, DenseArray({n, 0}), Branch::kForeground, MergeNorm::kRaw),
                  DimensionError);
}

TEST_CASE("merged token count at N = 1024 and ratio 1/9") {
  BlockConfig cfg;
  cfg.tokens = 1024;
  cfg.channels = 8;
  const auto schema = block_schema(BlockKind::kSgst, cfg);
  const auto it = std::find_if(schema.begin(), schema.end(),
                               [](const ParamSpec& s) { return s.name == "sgst.wm"; });
  REQUIRE(it != schema.end());
  CHECK(it->shape == Shape{1024, 114});
  Rng rng(53);
  const DenseArray x = rng.normal_array({1024, 8});
  const std::vector<double> h(1024, 0.7);
  const DenseArray merged =
      sgst_soft_merge(x, h, rng.normal_array({1024, 114}), Branch::kForeground, MergeNorm::kSoftmax);
  CHECK(merged.shape() == Shape{114, 8});
}

TEST_CASE("branch attention with a single merged token") {
  const BlockConfig cfg = small_config(5, 8, 2);
  const ParamSet p = random_params(BlockKind::kSgst, cfg, 61);
  const DenseArray q = random_tokens(4, 8, 62);
  const DenseArray merged = random_tokens(1, 8, 63);
  BranchCache cache;
  const DenseArray out = sgst_branch_attend(q, merged, p, cfg, &cache);
  CHECK(out.shape() == Shape{4, 8});
  for (const auto& probs : cache.attention.probs) {
    CHECK(probs.shape() == Shape{4, 1});
    for (double v : probs.data()) CHECK(v == 1.0);
  }
  const DenseArray empty = sgst_branch_attend(DenseArray({0, 8}), merged, p, cfg);
  CHECK(empty.shape() == Shape{0, 8});
}

TEST_CASE("scatter of gathered rows is the identity bitwise") {
  Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    const DenseArray x = rng.normal_array({n, 3});
    std::vector<double> h(n);
    for (auto& v : h) v = rng.uniform01();
    const GatherPlan plan = make_gather_plan(h);
    CHECK(sgst_scatter(x, plan, gather_rows(x, plan.fg), gather_rows(x, plan.bg)) == x);

    const DenseArray uf = rng.normal_array({plan.fg.size(), 3});
    const DenseArray ub = rng.normal_array({plan.bg.size(), 3});
    const DenseArray out = sgst_scatter(x, plan, uf, ub);
    CHECK(gather_rows(out, plan.fg) == uf);
    CHECK(gather_rows(out, plan.bg) == ub);
  }
}

TEST_CASE("scatter with an all-foreground plan returns the foreground updates") {
  const DenseArray x = random_tokens(4, 2, 72);
  const DenseArray upd = random_tokens(4, 2, 73);
  GatherPlan plan;
  plan.fg = {0, 1, 2, 3};
  CHECK(sgst_scatter(x, plan, upd, DenseArray({0, 2})) == upd);
}

TEST_CASE("scatter rejects mismatched updates and invalid plans") {
  const DenseArray x = random_tokens(4, 2, 74);
  GatherPlan plan;
  plan.fg = {0, 2};
  plan.bg = {1, 3};
  CHECK_THROWS_AS(sgst_scatter(x, plan, DenseArray({3, 2}), DenseArray({2, 2})), DimensionError);
  plan.bg = {1, 1};
  CHECK_THROWS_AS(sgst_scatter(x, plan, DenseArray({2, 2}), DenseArray({2, 2})), DimensionError);
  plan.bg = {1};
  CHECK_THROWS_AS(sgst_scatter(x, plan, DenseArray({2, 2}), DenseArray({1, 2})), DimensionError);
}

TEST_CASE("foreground-only SGST passes an all-background input through") {
  BlockConfig cfg = small_config();
  cfg.fg_only = true;
  ParamSet p = random_params(BlockKind::kSgst, cfg, 81);
  zero_tensor(p, "sgst.wh");
  p.at("sgst.bh")[0] = -10.0;
  const DenseArray x = random_tokens(cfg.tokens, cfg.channels, 82);
  SgstCache cache;
  CHECK(sgst_block_forward(x, p, cfg, &cache) == x);
  CHECK(cache.plan.fg.empty());

  const DenseArray low = DenseArray::full({cfg.tokens}, 0.2);
  cfg.fg_only = false;
  p = random_params(BlockKind::kSgst, cfg, 83);
  cfg.fg_only = true;
  CHECK(sgst_block_forward(x, p, cfg, nullptr, nullptr, &low) == x);
}

TEST_CASE("foreground-only SGST leaves background rows untouched") {
  BlockConfig cfg = small_config();
  cfg.fg_only = true;
  const ParamSet p = random_params(BlockKind::kSgst, cfg, 84);
  const DenseArray x = random_tokens(cfg.tokens, cfg.channels, 85);
  DenseArray h({cfg.tokens});
  for (std::size_t i = 0; i < cfg.tokens; ++i) h[i] = i % 2 ? 0.3 : 0.8;
  const DenseArray out = sgst_block_forward(x, p, cfg, nullptr, nullptr, &h);
  for (std::size_t i = 1; i < cfg.tokens; i += 2) CHECK(rows_equal(out.row(i), x.row(i)));
  CHECK_FALSE(rows_equal(out.row(0), x.row(0)));
}

TEST_CASE("SGST reduces to the vanilla block with identity merge and unit heatmap") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    BlockConfig cfg = small_config(7, 8, 2);
    cfg.merge_ratio = {1, 1};
    cfg.merge_norm = MergeNorm::kRaw;
    ParamSet p = random_params(BlockKind::kSgst, cfg, 90 + seed);
    p.at("sgst.wm") = DenseArray::identity(cfg.tokens);
    const DenseArray x = random_tokens(cfg.tokens, cfg.channels, 190 + seed);
    const DenseArray ones = DenseArray::full({cfg.tokens}, 1.0);
    const DenseArray sgst = sgst_block_forward(x, p, cfg, nullptr, nullptr, &ones);
    const DenseArray vt = vanilla_block_forward(x, p, cfg);
    CHECK(max_abs_diff(sgst, vt) < 1e-10);
  }
}

TEST_CASE("SGST timing excludes the FFN sub-layers") {
  const BlockConfig cfg = small_config();
  const ParamSet p = random_params(BlockKind::kSgst, cfg, 95);
  SublayerTiming t;
  sgst_block_forward(random_tokens(cfg.tokens, cfg.channels, 96), p, cfg, nullptr, &t);
  CHECK(t.attention_seconds >= 0.0);
}

TEST_CASE("block schema shapes and initialization") {
  BlockConfig cfg = small_config(16, 8, 2);
  const auto s = block_schema(BlockKind::kCst, cfg);
  ParamSet a = random_params(BlockKind::kCst, cfg, 7);
  CHECK_NOTHROW(check_schema(a, s));
  CHECK(a.at("cst.w1").shape() == Shape{8, 2});
  CHECK(a.at("ln1.gamma") == DenseArray::full({8}, 1.0));
  const double bound = 1.0 / std::sqrt(8.0);
  for (double v : a.at("ffn.w1").data()) CHECK(std::abs(v) <= bound);
  CHECK(random_params(BlockKind::kCst, cfg, 7) == a);
  CHECK_FALSE(random_params(BlockKind::kCst, cfg, 8) == a);

  a.at("ffn.w2") = DenseArray({3, 3});
  CHECK_THROWS_WITH_AS(check_schema(a, s), doctest::Contains("ffn.w2"), ConfigError);
  ParamSet extra = random_params(BlockKind::kCst, cfg, 7);
  extra.set("zzz", DenseArray({1}));
  CHECK_THROWS_WITH_AS(check_schema(extra, s), doctest::Contains("zzz"), ConfigError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const BlockConfig cfg = small_config();
  ParamSet p = random_params(BlockKind::kSgst, cfg, 9);
  p.at("ffn.b1")[0] = -0.0;
  p.at("ffn.b1")[1] = 1e-310;
  std::stringstream ss;
  write_checkpoint(ss, p);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "ISOC");
  std::stringstream in(bytes);
  const ParamSet q = read_checkpoint(in);
  REQUIRE(q.size() == p.size());
  for (const auto& [name, value] : p) {
    const auto& other = q.at(name);
    REQUIRE(other.shape() == value.shape());
    CHECK(std::memcmp(other.data().data(), value.data().data(), value.size() * 8) == 0);
  }
  std::stringstream again;
  write_checkpoint(again, q);
  CHECK(again.str() == bytes);
}

TEST_CASE("corrupt checkpoints report where they fail") {
  const ParamSet p = random_params(BlockKind::kVanilla, small_config(), 10);
  std::stringstream ss;
  write_checkpoint(ss, p);
  std::string bytes = ss.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_checkpoint(truncated), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  std::stringstream bad_magic(bad);
  try {
    read_checkpoint(bad_magic, "bad.isoc");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.source() == "bad.isoc");
    CHECK(e.offset() == 0);
  }
}
