#include "isomer/verify/suites.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "isomer/blocks/blocks.hpp"
#include "isomer/blocks/checkpoint.hpp"
#include "isomer/blocks/schema.hpp"
#include "isomer/cost/cost.hpp"
#include "isomer/numerics/flops.hpp"
#include "isomer/numerics/rng.hpp"
#include "isomer/numerics/tensor_io.hpp"
#include "isomer/pipeline/config.hpp"
#include "isomer/verify/golden.hpp"
#include "isomer/verify/gradcheck.hpp"
#include "isomer/verify/oracles.hpp"

#ifndef ISOMER_DEFAULT_FIXTURE_DIR
#define ISOMER_DEFAULT_FIXTURE_DIR "tests/fixtures"
#endif

namespace isomer::verify {

namespace fs = std::filesystem;
using blocks::BlockConfig;
using blocks::BlockKind;
using blocks::ParamSet;

namespace {

CheckReport named(std::string name) {
  CheckReport r;
  r.name = std::move(name);
  return r;
}

double worst_diff(const DenseArray& a, const DenseArray& b) {
  if (a.shape() != b.shape()) return double(INFINITY);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (!(d <= m)) m = std::isnan(d) ? INFINITY : d;
  }
  return m;
}

std::size_t pick(Rng& rng, std::initializer_list<std::size_t> options) {
  return *(options.begin() + rng.below(options.size()));
}

BlockConfig random_config(Rng& rng, std::size_t max_tokens, std::size_t max_channels) {
  BlockConfig cfg;
  cfg.tokens = 1 + rng.below(max_tokens);
  do {
    cfg.channels = pick(rng, {4, 8, 16, 24, 32});
  } while (cfg.channels > max_channels);
  do {
    cfg.heads = pick(rng, {1, 2, 4});
  } while (cfg.channels % cfg.heads != 0);
  cfg.ffn_ratio = pick(rng, {1, 2, 4});
  cfg.context_reduction = pick(rng, {1, 2, 4});
  static const blocks::Ratio ratios[] = {{1, 1}, {4, 9}, {1, 4}, {1, 9}, {1, 36}};
  cfg.merge_ratio = ratios[rng.below(5)];
  cfg.merge_norm = rng.below(2) ? blocks::MergeNorm::kSoftmax : blocks::MergeNorm::kRaw;
  cfg.fg_only = rng.below(4) == 0;
  return cfg;
}

ParamSet random_params(BlockKind kind, const BlockConfig& cfg, Rng& rng) {
  ParamSet p = blocks::init_params(blocks::block_schema(kind, cfg), rng);
  condition_point(p, rng);
  return p;
}

DenseArray permute_rows(const DenseArray& x, const std::vector<std::size_t>& perm) {
  return gather_rows(x, perm);
}

std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

CheckReport finish(CheckReport r) {
  r.pass = r.max_abs_err <= r.tolerance && r.detail.rfind("FAILED", 0) != 0;
  return r;
}

}  // namespace

fs::path default_fixture_dir() { return ISOMER_DEFAULT_FIXTURE_DIR; }

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"oracles", "cst",  "reduction", "gather",
                                                 "flops",   "cost", "golden",    "properties",
                                                 "gradients"};
  return names;
}

bool is_suite(const std::string& name) {
  return name == "all" ||
         std::find(suite_names().begin(), suite_names().end(), name) != suite_names().end();
}

std::uint64_t case_seed(std::uint64_t seed, std::size_t index) {
  return seed * 1000003ULL + index;
}

// ---- oracles -----------------------------------------------------------------

CheckReport check_oracle_equivalence(std::uint64_t seed, std::size_t cases) {
  CheckReport r = named("oracles.attention");
  r.tolerance = 1e-10;
  r.seed = seed;
  r.cases = cases;
  r.config = {{"max_tokens", 16}, {"max_channels", 32}};
  for (std::size_t i = 0; i < cases; ++i) {
    const std::uint64_t s = case_seed(seed, i);
    Rng rng(s);
    BlockConfig cfg = random_config(rng, 16, 32);
    const ParamSet p = random_params(BlockKind::kVanilla, cfg, rng);
    const DenseArray x = rng.normal_array({cfg.tokens, cfg.channels});
    const double e1 = worst_diff(blocks::mhsa_forward(x, p.extract("attn."), cfg.heads),
                                   oracle_multihead(x, x, p.extract("attn."), cfg.heads));
    const DenseArray q = rng.normal_array({rng.below(17), cfg.channels});
    const DenseArray merged = rng.normal_array({1 + rng.below(16), cfg.channels});
    const double e2 = worst_diff(blocks::sgst_branch_attend(q, merged, p, cfg),
                                   oracle_branch(q, merged, p, cfg));
    const double e = std::max(e1, e2);
    if (e > r.max_abs_err) {
      r.max_abs_err = e;
      r.detail = "worst case seed " + std::to_string(s) + (e1 >= e2 ? " (mhsa)" : " (branch)");
    }
  }
  return finish(r);
}

// ---- CST -----------------------------------------------------------------

CheckReport check_cst_construction(std::uint64_t seed, std::size_t cases) {
  CheckReport r = named("cst.query_shared_attention");
  r.tolerance = 1e-12;
  r.seed = seed;
  r.cases = cases;
  std::size_t addend_mismatch = 0;
  for (std::size_t i = 0; i < cases; ++i) {
    const std::uint64_t s = case_seed(seed, i);
    Rng rng(s);
    BlockConfig cfg = random_config(rng, 16, 32);
    const ParamSet p = random_params(BlockKind::kCst, cfg, rng);
    const DenseArray x = rng.normal_array({cfg.tokens, cfg.channels});
    const DenseArray out = blocks::cst_global_context(x, p);
    const double e = worst_diff(out, oracle_cst_as_attention(x, p));
    if (e > r.max_abs_err) {
      r.max_abs_err = e;
      r.detail = "worst case seed " + std::to_string(s);
    }
    // Every token receives the same added vector, bit for bit.
    const DenseArray refined = blocks::cst_context(x, p);
    for (std::size_t t = 0; t < x.rows(); ++t)
      for (std::size_t j = 0; j < x.cols(); ++j)
        if (out(t, j) != x(t, j) + refined[j]) ++addend_mismatch;
  }
  if (addend_mismatch) {
    r.detail = "FAILED: " + std::to_string(addend_mismatch) + " entries differ from x + refined";
  }
  return finish(r);
}

// ---- SGST reduction -----------------------------------------------------------

CheckReport check_sgst_reduction(std::uint64_t seed, std::size_t cases) {
  CheckReport r = named("reduction.sgst_to_vanilla");
  r.tolerance = 1e-10;
  r.seed = seed;
  r.cases = cases;
  r.config = {{"merge_norm", "raw"}, {"merge_ratio", "1"}, {"wm", "identity"}, {"heatmap", 1.0}};
  for (std::size_t i = 0; i < cases; ++i) {
    const std::uint64_t s = case_seed(seed, i);
    Rng rng(s);
    BlockConfig cfg = random_config(rng, 16, 32);
    cfg.merge_ratio = {1, 1};
    cfg.merge_norm = blocks::MergeNorm::kRaw;
    cfg.fg_only = false;
    ParamSet p = random_params(BlockKind::kSgst, cfg, rng);
    DenseArray& wm = p.at("sgst.wm");
    wm = DenseArray({cfg.tokens, cfg.tokens});
    for (std::size_t t = 0; t < cfg.tokens; ++t) wm(t, t) = 1.0;
    DenseArray ones({cfg.tokens});
    for (std::size_t t = 0; t < cfg.tokens; ++t) ones[t] = 1.0;
    const DenseArray x = rng.normal_array({cfg.tokens, cfg.channels});
    const DenseArray a = blocks::sgst_block_forward(x, p, cfg, nullptr, nullptr, &ones);
    const DenseArray b = blocks::vanilla_block_forward(x, p, cfg);
    const double e = worst_diff(a, b);
    if (e > r.max_abs_err) {
      r.max_abs_err = e;
      r.detail = "worst case seed " + std::to_string(s);
    }
  }
  return finish(r);
}

// ---- gather / scatter ------------------------------------------------------------

CheckReport check_gather_scatter(std::uint64_t seed, std::size_t cases) {
  CheckReport r = named("gather.partition_and_identity");
  r.tolerance = 0.0;
  r.seed = seed;
  r.cases = cases;
  for (std::size_t i = 0; i < cases && r.detail.empty(); ++i) {
    const std::uint64_t s = case_seed(seed, i);
    Rng rng(s);
    const std::size_t n = 1 + rng.below(64);
    const std::size_t c = 1 + rng.below(8);
    DenseArray heat = rng.uniform_array({n}, 0.0, 1.0);
    // Exact threshold values and extremes on purpose.
    for (std::size_t t = 0; t < n; ++t) {
      const auto u = rng.below(8);
      if (u == 0) heat[t] = blocks::kGatherThreshold;
      if (u == 1) heat[t] = std::nextafter(blocks::kGatherThreshold, 0.0);
    }
    const blocks::GatherPlan plan = blocks::make_gather_plan(heat.data());
    std::vector<int> seen(n, 0);
    bool ok = plan.tokens() == n && std::is_sorted(plan.fg.begin(), plan.fg.end()) &&
              std::is_sorted(plan.bg.begin(), plan.bg.end());
    for (auto t : plan.fg) ok = ok && t < n && heat[t] >= 0.5 && ++seen[t] == 1;
    for (auto t : plan.bg) ok = ok && t < n && heat[t] < 0.5 && ++seen[t] == 1;
    const DenseArray x = rng.normal_array({n, c});
    const DenseArray back =
        blocks::sgst_scatter(x, plan, gather_rows(x, plan.fg), gather_rows(x, plan.bg));
    ok = ok && std::equal(back.data().begin(), back.data().end(), x.data().begin(),
                          [](double a, double b) {
                            return std::memcmp(&a, &b, sizeof a) == 0;
                          });
    if (!ok) {
      r.max_abs_err = INFINITY;
      r.detail = "FAILED: case seed " + std::to_string(s);
    }
  }
  return finish(r);
}

// ---- FLOP counts ----------------------------------------------------------------

std::vector<CheckReport> check_flop_counts(std::uint64_t seed, std::size_t configs) {
  std::vector<CheckReport> out;
  for (BlockKind kind : {BlockKind::kVanilla, BlockKind::kCst, BlockKind::kSgst}) {
    CheckReport r = named("flops." + std::string(blocks::to_string(kind)));
    r.tolerance = 0.0;
    r.seed = seed;
    r.cases = configs;
    r.config = nlohmann::json::array();
    for (std::size_t i = 0; i < configs; ++i) {
      const std::uint64_t s = case_seed(seed, i);
      Rng rng(s);
      BlockConfig cfg = random_config(rng, 40, 32);
      const ParamSet p = random_params(kind, cfg, rng);
      const DenseArray x = rng.normal_array({cfg.tokens, cfg.channels});
      std::size_t n_fg = 0;
      if (kind == BlockKind::kSgst) {
        n_fg = blocks::make_gather_plan(blocks::sgst_block_heatmap(x, p).data()).fg.size();
      }
      const flops::Scope scope;
      blocks::block_forward(kind, x, p, cfg);
      const std::uint64_t measured = scope.elapsed();
      const std::uint64_t analytic = cost::block_cost(kind, cfg, n_fg).total();
      nlohmann::json c = block_config_to_json(cfg);
      c["n_fg"] = n_fg;
      c["measured"] = measured;
      c["analytic"] = analytic;
      r.config.push_back(c);
      const double diff = std::abs(static_cast<double>(measured) - static_cast<double>(analytic));
      if (diff > r.max_abs_err) {
        r.max_abs_err = diff;
        r.max_rel_err = diff / std::max(1.0, static_cast<double>(analytic));
        r.detail = "case seed " + std::to_string(s) + " measured=" + std::to_string(measured) +
                   " analytic=" + std::to_string(analytic);
      }
    }
    out.push_back(finish(r));
  }
  return out;
}

// ---- MHSA-portion reduction -----------------------------------------------------------

CheckReport check_mhsa_reduction() {
  CheckReport r = named("cost.mhsa_reduction");
  r.tolerance = 0.16;
  r.config = nlohmann::json::array();
  double worst = 0.0;
  double reduction_1024_256 = 0.0;
  double attention_1024_256 = 0.0;
  for (std::size_t n : {256, 1024, 4096}) {
    for (std::size_t c : {64, 256, 512}) {
      const std::size_t k = (n + 8) / 9;
      const auto vt = cost::flops_mhsa(n, c, 1);
      // Both branches active; the per-branch query split does not change
      // the totals.
      const auto sg = cost::flops_sgst(n, c, 1, k, n / 2);
      const double ratio =
          static_cast<double>(sg.mhsa_portion()) / static_cast<double>(vt.mhsa_portion());
      const double attention = static_cast<double>(sg.attention_portion()) /
                               static_cast<double>(vt.attention_portion());
      r.config.push_back(
          {{"N", n}, {"C", c}, {"K", k}, {"ratio", ratio}, {"attention_ratio", attention}});
      worst = std::max(worst, ratio);
      if (n == 1024 && c == 256) {
        reduction_1024_256 = 1.0 - ratio;
        attention_1024_256 = 1.0 - attention;
      }
      ++r.cases;
    }
  }
  r.max_abs_err = worst;
  r.max_rel_err = worst;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "max ratio %.4f (need <= 0.16); reduction at N=1024 C=256: %.2f%% (need 84-90%%); "
                "without projections and merge: %.2f%%",
                worst, 100.0 * reduction_1024_256, 100.0 * attention_1024_256);
  r.detail = buf;
  r.pass = worst <= 0.16 && reduction_1024_256 >= 0.84 && reduction_1024_256 <= 0.90;
  return r;
}

// ---- gradients ------------------------------------------------------------------

namespace {

CheckReport aggregate(const std::string& name, std::uint64_t seed,
                      const std::function<CheckReport(std::uint64_t)>& one, std::size_t seeds) {
  CheckReport r = named(name);
  r.tolerance = GradCheckOptions{}.tolerance;
  r.seed = seed;
  r.pass = true;
  r.config = {{"seeds", seeds}, {"first_seed", seed}};
  std::string worst_detail;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < seeds; ++i) {
    const CheckReport c = one(seed + i);
    r.cases += c.cases;
    r.max_abs_err = std::max(r.max_abs_err, c.max_abs_err);
    if (c.max_rel_err >= r.max_rel_err) {
      r.max_rel_err = c.max_rel_err;
      worst_detail = "seed " + std::to_string(c.seed) + " " + c.detail;
    }
    for (const auto& e : c.excluded) r.excluded.push_back("seed " + std::to_string(c.seed) + " " + e);
    if (!c.pass) {
      r.pass = false;
      ++failures;
    }
  }
  r.detail = (failures ? std::to_string(failures) + " seed(s) failed; " : std::string()) + worst_detail;
  return r;
}

}  // namespace

std::vector<CheckReport> check_gradients(std::uint64_t seed, std::size_t seeds) {
  std::vector<CheckReport> out;
  for (BlockKind kind : {BlockKind::kVanilla, BlockKind::kCst, BlockKind::kSgst}) {
    out.push_back(aggregate("gradients." + std::string(blocks::to_string(kind)), seed,
                            [kind](std::uint64_t s) {
                              return grad_check_block(kind, gradcheck_block_config(kind), s);
                            },
                            seeds));
  }
  out.push_back(aggregate("gradients.mix", seed, [](std::uint64_t s) { return grad_check_mix(s); },
                          seeds));
  out.push_back(aggregate("gradients.pipeline", seed,
                          [](std::uint64_t s) {
                            return grad_check_pipeline(pipeline::tiny_config(), s);
                          },
                          seeds));
  out.push_back(check_routing_boundary());
  return out;
}

CheckReport check_routing_boundary() {
  const BlockConfig cfg = gradcheck_block_config(BlockKind::kSgst);
  Rng rng(11);
  ParamSet p = random_params(BlockKind::kSgst, cfg, rng);
  // Every heatmap value sits 1e-12 above the threshold.
  p.at("sgst.wh") = DenseArray({cfg.channels, 1});
  p.at("sgst.bh")[0] = std::log((0.5 + 1e-12) / (0.5 - 1e-12));
  CheckReport r = run_grad_check("gradients.sgst_boundary",
                                 block_grad_problem(BlockKind::kSgst, cfg, 11, std::move(p)));
  r.seed = 11;
  r.config = {{"heatmap", "0.5 + 1e-12"}};
  const bool bh_flagged =
      std::find(r.excluded.begin(), r.excluded.end(), "sgst.bh[0] routing-fragile") !=
      r.excluded.end();
  if (!bh_flagged) {
    r.pass = false;
    r.detail = "FAILED: sgst.bh[0] was not flagged routing-fragile; " + r.detail;
  }
  return r;
}

// ---- golden -------------------------------------------------------------------------

std::vector<CheckReport> check_golden(const fs::path& dir) {
  std::vector<CheckReport> out;
  std::vector<fs::path> dirs;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir))
      if (fs::exists(e.path() / "fixture.json")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) {
    CheckReport r = named("golden");
    r.detail = "no fixtures under " + dir.string();
    out.push_back(r);
    return out;
  }
  for (const auto& d : dirs) {
    try {
      out.push_back(golden_compare(d));
    } catch (const std::exception& e) {
      CheckReport r = named("golden." + d.filename().string());
      r.detail = e.what();
      out.push_back(r);
    }
  }
  return out;
}

// ---- properties -------------------------------------------------------------------

CheckReport run_property(const std::string& name, std::uint64_t seed, std::size_t cases,
                         double tolerance, const std::function<double(std::uint64_t)>& body) {
  CheckReport r = named(name);
  r.tolerance = tolerance;
  r.seed = seed;
  r.cases = cases;
  std::uint64_t first_failure = 0;
  bool failed = false;
  for (std::size_t i = 0; i < cases; ++i) {
    const std::uint64_t s = case_seed(seed, i);
    double e;
    try {
      e = body(s);
    } catch (const std::exception& ex) {
      e = INFINITY;
      r.detail = std::string("exception: ") + ex.what();
    }
    if (std::isnan(e)) e = INFINITY;
    if (e > r.max_abs_err) r.max_abs_err = e;
    if (e > tolerance && !failed) {
      failed = true;
      first_failure = s;
    }
  }
  r.pass = !failed;
  r.detail = (failed ? "first failing case seed " + std::to_string(first_failure) + " " : "") +
             r.detail;
  return r;
}

std::vector<CheckReport> check_properties(std::uint64_t seed, std::size_t cases) {
  std::vector<CheckReport> out;

  out.push_back(run_property("properties.softmax_row_sums", seed, cases, 1e-12, [](std::uint64_t s) {
    Rng rng(s);
    DenseArray x = rng.normal_array({1 + rng.below(8), 1 + rng.below(40)}, 30.0);
    const DenseArray y = softmax(x, 1);
    double e = 0.0;
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) sum += y(i, j);
      e = std::max(e, std::abs(sum - 1.0));
    }
    return e;
  }));

  out.push_back(run_property("properties.attention_row_sums", seed, cases, 1e-12, [](std::uint64_t s) {
    Rng rng(s);
    BlockConfig cfg = random_config(rng, 16, 32);
    const ParamSet p = random_params(BlockKind::kVanilla, cfg, rng);
    const DenseArray x = rng.normal_array({cfg.tokens, cfg.channels});
    double e = 0.0;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const DenseArray a = blocks::attention_matrix(x, p.extract("attn."), cfg.heads, h);
      for (std::size_t i = 0; i < a.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) sum += a(i, j);
        e = std::max(e, std::abs(sum - 1.0));
      }
    }
    return e;
  }));

  out.push_back(run_property("properties.layernorm_mean_zero", seed, cases, 1e-10, [](std::uint64_t s) {
    Rng rng(s);
    const DenseArray x = rng.normal_array({1 + rng.below(8), 2 + rng.below(40)}, 10.0);
    DenseArray g({x.cols()}), b({x.cols()});
    for (std::size_t j = 0; j < x.cols(); ++j) g[j] = 1.0;
    const DenseArray y = layernorm(x, g, b, 1);
    double e = 0.0;
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double m = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) m += y(i, j);
      e = std::max(e, std::abs(m / static_cast<double>(y.cols())));
    }
    return e;
  }));

  out.push_back(run_property("properties.permutation_equivariance", seed, cases, 1e-10,
                             [](std::uint64_t s) {
    Rng rng(s);
    const BlockKind kind = static_cast<BlockKind>(rng.below(3));
    BlockConfig cfg = random_config(rng, 16, 16);
    ParamSet p = random_params(kind, cfg, rng);
    const DenseArray x = rng.normal_array({cfg.tokens, cfg.channels});
    const auto perm = random_permutation(rng, cfg.tokens);
    const DenseArray a = permute_rows(blocks::block_forward(kind, x, p, cfg), perm);
    if (kind == BlockKind::kSgst) p.at("sgst.wm") = permute_rows(p.at("sgst.wm"), perm);
    const DenseArray b = blocks::block_forward(kind, permute_rows(x, perm), p, cfg);
    return worst_diff(a, b);
  }));

  out.push_back(run_property("properties.tensor_round_trip", seed, cases, 0.0, [](std::uint64_t s) {
    Rng rng(s);
    Shape shape;
    const std::size_t rank = rng.below(5);
    for (std::size_t d = 0; d < rank; ++d) shape.push_back(rng.below(5));
    DenseArray a = rng.normal_array(shape, 1e3);
    for (std::size_t i = 0; i < a.size(); i += 3) a[i] = std::ldexp(a[i], -1060);  // subnormals
    std::stringstream bin, text;
    write_tensor(bin, a);
    write_tensor_text(text, a);
    const DenseArray b = read_tensor(bin);
    const DenseArray c = read_tensor_text(text);
    const bool same = b.shape() == a.shape() && c.shape() == a.shape() &&
                      std::memcmp(a.data().data(), b.data().data(), a.size() * 8) == 0 &&
                      std::memcmp(a.data().data(), c.data().data(), a.size() * 8) == 0;
    return same ? 0.0 : double(INFINITY);
  }));

  out.push_back(run_property("properties.checkpoint_round_trip", seed, cases, 0.0, [](std::uint64_t s) {
    Rng rng(s);
    const BlockKind kind = static_cast<BlockKind>(rng.below(3));
    const BlockConfig cfg = random_config(rng, 12, 16);
    const ParamSet p = random_params(kind, cfg, rng);
    std::stringstream ss;
    blocks::write_checkpoint(ss, p);
    return blocks::read_checkpoint(ss, "memory") == p ? 0.0 : double(INFINITY);
  }));

  out.push_back(run_property("properties.sgst_outputs_finite", seed, cases, 0.0, [](std::uint64_t s) {
    Rng rng(s);
    const BlockConfig cfg = random_config(rng, 24, 16);
    const ParamSet p = random_params(BlockKind::kSgst, cfg, rng);
    const DenseArray x = rng.normal_array({cfg.tokens, cfg.channels}, 100.0);
    const DenseArray y = blocks::sgst_block_forward(x, p, cfg);
    for (double v : y.data())
      if (!std::isfinite(v)) return double(INFINITY);
    return 0.0;
  }));
  return out;
}

// ---- dispatch ---------------------------------------------------------------------

std::vector<CheckReport> run_suite(const std::string& name, const SuiteOptions& opts) {
  if (!is_suite(name)) throw std::invalid_argument("unknown suite '" + name + "'");
  std::vector<CheckReport> out;
  auto add = [&](std::vector<CheckReport> v) { out.insert(out.end(), v.begin(), v.end()); };
  const bool all = name == "all";
  const std::uint64_t s = opts.seed;
  if (all || name == "oracles") out.push_back(check_oracle_equivalence(s));
  if (all || name == "cst") out.push_back(check_cst_construction(s));
  if (all || name == "reduction") out.push_back(check_sgst_reduction(s));
  if (all || name == "gather") out.push_back(check_gather_scatter(s));
  if (all || name == "flops") add(check_flop_counts(s));
  if (all || name == "cost") out.push_back(check_mhsa_reduction());
  if (all || name == "golden")
    add(check_golden(opts.fixture_dir.empty() ? default_fixture_dir() : opts.fixture_dir));
  if (all || name == "properties") add(check_properties(s));
  if (all || name == "gradients") add(check_gradients(s, opts.gradient_seeds));
  return sorted_by_name(std::move(out));
}

}  // namespace isomer::verify
