#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "isomer/blocks/blocks.hpp"
#include "isomer/blocks/schema.hpp"
#include "isomer/numerics/rng.hpp"
#include "isomer/numerics/tensor_io.hpp"
#include "isomer/verify/golden.hpp"
#include "isomer/verify/gradcheck.hpp"
#include "isomer/verify/oracles.hpp"
#include "isomer/verify/suites.hpp"

using namespace isomer;
using namespace isomer::verify;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("isomer_test_verify_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

blocks::ParamSet cst_params(std::size_t c, std::uint64_t seed) {
  blocks::BlockConfig cfg;
  cfg.channels = c;
  cfg.context_reduction = 2;
  Rng rng(seed);
  return blocks::init_params(blocks::block_schema(blocks::BlockKind::kCst, cfg), rng);
}

}  // namespace

TEST_CASE("oracle attention with one key returns that value row") {
  const DenseArray q({1, 3}, {0.3, -1.0, 2.0});
  const DenseArray k({1, 3}, {1.0, 5.0, -2.0});
  const DenseArray v({1, 2}, {7.5, -0.25});
  const DenseArray out = oracle_attention(q, k, v, 0.7);
  CHECK(out(0, 0) == 7.5);
  CHECK(out(0, 1) == -0.25);
}

TEST_CASE("oracle attention approaches a one-hot lookup at large scale") {
  DenseArray qk({3, 3});
  for (std::size_t i = 0; i < 3; ++i) qk(i, i) = 1.0;
  const DenseArray v({3, 2}, {1, 2, 3, 4, 5, 6});
  const DenseArray out = oracle_attention(qk, qk, v, 100.0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(out(i, 0) == doctest::Approx(v(i, 0)).epsilon(1e-12));
    CHECK(out(i, 1) == doctest::Approx(v(i, 1)).epsilon(1e-12));
  }
}

TEST_CASE("oracle and fast single-head attention agree") {
  for (std::uint64_t s = 1; s <= 50; ++s) {
    Rng rng(s);
    const std::size_t n = 1 + rng.below(16), c = 4 * (1 + rng.below(8));
    blocks::BlockConfig cfg;
    cfg.channels = c;
    cfg.heads = 1;
    const auto p = blocks::init_params(blocks::block_schema(blocks::BlockKind::kVanilla, cfg), rng);
    const DenseArray x = rng.normal_array({n, c});
    const DenseArray a = blocks::mhsa_forward(x, p.extract("attn."), 1);
    const DenseArray b = oracle_multihead(x, x, p.extract("attn."), 1);
    CHECK(max_abs_diff(a, b) < 1e-10);
  }
}

TEST_CASE("CST oracle: zero head gives the mean-token context") {
  auto p = cst_params(8, 3);
  p.at("cst.wg") = DenseArray({8, 1});
  Rng rng(4);
  const DenseArray x = rng.normal_array({5, 8});
  const DenseArray fast = blocks::cst_global_context(x, p);
  const DenseArray slow = oracle_cst_as_attention(x, p);
  CHECK(max_abs_diff(fast, slow) < 1e-12);
  // With uniform weights the context is the mean token.
  const DenseArray g = blocks::cst_weight_map(x, p);
  for (double v : g.data()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("CST oracle: a single token") {
  const auto p = cst_params(8, 5);
  Rng rng(6);
  const DenseArray x = rng.normal_array({1, 8});
  CHECK(max_abs_diff(blocks::cst_global_context(x, p), oracle_cst_as_attention(x, p)) < 1e-12);
}

TEST_CASE("gradient check passes for a 4 x 8 vanilla block") {
  blocks::BlockConfig cfg;
  cfg.tokens = 4;
  cfg.channels = 8;
  cfg.heads = 2;
  const CheckReport r = grad_check_block(blocks::BlockKind::kVanilla, cfg, 3);
  CHECK_MESSAGE(r.pass, format_line(r));
  CHECK(r.cases > 0);
}

TEST_CASE("gradient check of an all-zero block passes") {
  for (auto kind : {blocks::BlockKind::kVanilla, blocks::BlockKind::kCst, blocks::BlockKind::kSgst}) {
    const auto cfg = gradcheck_block_config(kind);
    const auto zeros = blocks::zero_params(blocks::block_schema(kind, cfg));
    const CheckReport r = run_grad_check("zero", block_grad_problem(kind, cfg, 2, zeros));
    CHECK_MESSAGE(r.pass, format_line(r));
  }
}

TEST_CASE("gradient check flags routing-fragile coordinates at the gather boundary") {
  const CheckReport r = check_routing_boundary();
  CHECK_MESSAGE(r.pass, format_line(r));
  REQUIRE_FALSE(r.excluded.empty());
  CHECK(std::find(r.excluded.begin(), r.excluded.end(), "sgst.bh[0] routing-fragile") !=
        r.excluded.end());
  CHECK(r.detail.find("routing-fragile=") != std::string::npos);
}

TEST_CASE("gradient check reports a wrong analytic gradient") {
  GradProblem g = block_grad_problem(blocks::BlockKind::kCst,
                                     gradcheck_block_config(blocks::BlockKind::kCst), 4);
  auto analytic = g.analytic;
  g.analytic = [analytic](const blocks::ParamSet& t) {
    auto grads = analytic(t);
    grads.at("cst.w1")[2] *= 1.01;
    return grads;
  };
  const CheckReport r = run_grad_check("broken", g);
  CHECK_FALSE(r.pass);
  CHECK(r.detail.find("cst.w1[2]") != std::string::npos);
}

TEST_CASE("gradient check reports a non-finite loss") {
  GradProblem g = mix_grad_problem(3, 4, 1);
  g.eval = [](const blocks::ParamSet&, Signature*) { return NAN; };
  const CheckReport r = run_grad_check("nan", g);
  CHECK_FALSE(r.pass);
  CHECK(r.detail.find("non-finite") != std::string::npos);
}

TEST_CASE("golden fixture round trip is exact") {
  const fs::path dir = scratch_dir("roundtrip");
  Fixture f;
  f.op = "vanilla_block";
  blocks::BlockConfig cfg;
  cfg.tokens = 5;
  cfg.channels = 8;
  cfg.heads = 2;
  f.config = block_config_to_json(cfg);
  Rng rng(9);
  f.params = blocks::init_params(blocks::block_schema(blocks::BlockKind::kVanilla, cfg), rng);
  f.inputs["x"] = rng.normal_array({5, 8});
  f.expected = run_fixture_op(f);
  f.tolerance = 0.0;
  save_fixture(dir, f);
  const CheckReport r = golden_compare(dir);
  CHECK_MESSAGE(r.pass, format_line(r));
  CHECK(r.max_abs_err == 0.0);
}

TEST_CASE("perturbed golden fixture fails and names the worst element") {
  const fs::path dir = scratch_dir("perturbed");
  Fixture f;
  f.op = "softmax";
  Rng rng(2);
  f.inputs["x"] = rng.normal_array({3, 4});
  f.expected = run_fixture_op(f);
  f.expected(2, 1) += 1e-6;
  save_fixture(dir, f);
  const CheckReport r = golden_compare(dir, 1e-10);
  CHECK_FALSE(r.pass);
  CHECK(r.detail.find("[2,1]") != std::string::npos);
}

TEST_CASE("missing or corrupt fixtures raise errors with file and offset") {
  const fs::path missing = scratch_dir("missing");
  CHECK_THROWS_AS(golden_compare(missing), FormatError);

  const fs::path dir = scratch_dir("corrupt");
  Fixture f;
  f.op = "softmax";
  f.inputs["x"] = DenseArray({2, 2}, {1, 2, 3, 4});
  f.expected = run_fixture_op(f);
  save_fixture(dir, f);
  // Truncate the payload of the expected tensor.
  const fs::path t = dir / "expected.isot";
  fs::resize_file(t, fs::file_size(t) - 5);
  try {
    golden_compare(dir);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.source().find("expected.isot") != std::string::npos);
    CHECK(e.offset() > 0);
  }

  std::ofstream(dir / "fixture.json") << "{\"op\": \"softmax\", ";
  try {
    golden_compare(dir);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.source().find("fixture.json") != std::string::npos);
    CHECK(e.offset() > 0);
  }
}

TEST_CASE("independent high-precision fixtures match") {
  const auto reports = check_golden(ISOMER_FIXTURE_DIR);
  CHECK(reports.size() >= 8);
  for (const auto& r : reports) CHECK_MESSAGE(r.pass, format_line(r));
}

TEST_CASE("property driver records the first failing case seed") {
  const CheckReport r = run_property("demo", 5, 100, 0.5, [](std::uint64_t s) {
    return s == case_seed(5, 42) || s == case_seed(5, 70) ? 1.0 : 0.0;
  });
  CHECK_FALSE(r.pass);
  CHECK(r.cases == 100);
  CHECK(r.detail.find(std::to_string(case_seed(5, 42))) != std::string::npos);
  Rng replay(case_seed(5, 42));
  CHECK(replay.seed() == case_seed(5, 42));
}

TEST_CASE("unknown suites are rejected") {
  CHECK_FALSE(is_suite("nope"));
  CHECK(is_suite("all"));
  CHECK_THROWS_AS(run_suite("nope"), std::invalid_argument);
}

TEST_CASE("suites are deterministic and sorted by name") {
  SuiteOptions opts;
  opts.seed = 7;
  const auto a = run_suite("properties", opts);
  const auto b = run_suite("properties", opts);
  CHECK(summary_json(a).dump() == summary_json(b).dump());
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].name <= a[i].name);
  CHECK(summary_json(a)["pass"] == true);
}

TEST_CASE("report line and summary format") {
  CheckReport r;
  r.name = "x.y";
  r.pass = true;
  r.max_rel_err = 1.5e-7;
  r.tolerance = 1e-4;
  r.excluded = {"a[0] routing-fragile"};
  const std::string line = format_line(r);
  CHECK(line.rfind("PASS x.y ", 0) == 0);
  CHECK(line.find("excluded=1") != std::string::npos);
  CheckReport bad = r;
  bad.name = "a.b";
  bad.pass = false;
  const auto j = summary_json({r, bad});
  CHECK(j["pass"] == false);
  CHECK(j["checks"][0]["name"] == "a.b");
  CHECK(j["checks"][1]["max_rel_err"] == 1.5e-7);
}
