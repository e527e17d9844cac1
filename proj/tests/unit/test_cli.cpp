#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "isomer/blocks/checkpoint.hpp"
#include "isomer/cli/bench.hpp"
#include "isomer/cli/commands.hpp"
#include "isomer/cli/manifest.hpp"

using namespace isomer;
using namespace isomer::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("isomer_test_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct CliResult {
  int status;
  std::string out, err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "isomer");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("summarize: median and interquartile range") {
  const auto one = summarize({2.5});
  CHECK(one.median == 2.5);
  CHECK(one.iqr == 0.0);
  // Sorted 1..5: q1 = 2, q3 = 4.
  const auto five = summarize({5, 1, 4, 2, 3});
  CHECK(five.median == 3.0);
  CHECK(five.iqr == doctest::Approx(2.0));
  const auto four = summarize({1, 2, 3, 4});
  CHECK(four.median == doctest::Approx(2.5));
  CHECK(four.iqr == doctest::Approx(1.5));
}

TEST_CASE("bench memory cap rejects oversized configurations before running") {
  BenchOptions opts;
  opts.max_elements = 1000;
  CHECK_THROWS_AS(check_memory_cap(blocks::BlockKind::kVanilla, 40, 2, opts), blocks::ConfigError);
  CHECK_NOTHROW(check_memory_cap(blocks::BlockKind::kCst, 40, 2, opts));
  opts.tokens = {40};
  opts.channels = {2};
  CHECK_THROWS_AS(run_bench(opts), blocks::ConfigError);
}

TEST_CASE("bench rows carry one timing per block and exact FLOPs") {
  BenchOptions opts;
  opts.tokens = {36};
  opts.channels = {8};
  opts.repeats = 3;
  opts.warmups = 0;
  const auto rows = run_bench(opts);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].block == "vt");
  CHECK(rows[2].merged == 4);
  for (const auto& r : rows) {
    CHECK(r.forward.median > 0.0);
    CHECK(r.attention.median <= r.forward.median);
    CHECK(r.attention_flops < r.flops);
  }
  std::ostringstream csv;
  write_bench_csv(csv, rows);
  CHECK(csv.str().rfind("block,N,C,heads,K,repeats,median_s,iqr_s,", 0) == 0);
}

TEST_CASE("manifest round trip") {
  RunManifest m;
  m.subcommand = "train";
  m.config = {{"model", {{"steps", 3}}}};
  m.seed = 7;
  m.threads = 2;
  m.version = "x";
  m.started_at = utc_timestamp();
  m.outputs = {"a", "b"};
  const fs::path d = scratch_dir("manifest");
  write_manifest(d / "m.json", m);
  const auto back = read_manifest(d / "m.json");
  CHECK(back.subcommand == "train");
  CHECK(back.config == m.config);
  CHECK(back.seed == 7);
  CHECK(back.threads == 2);
  CHECK(back.outputs == m.outputs);
  CHECK(m.started_at.size() == 20);
  CHECK(m.started_at.back() == 'Z');
}

TEST_CASE("usage errors exit 2") {
  CHECK(run({}).status == 2);
  CHECK(run({"frobnicate"}).status == 2);
  const auto r = run({"verify", "--suite", "nope"});
  CHECK(r.status == 2);
  CHECK(r.err.find("unknown suite 'nope'") != std::string::npos);
  CHECK(run({"dump", "--tiny", "--what", "nothing"}).status == 2);
}

TEST_CASE("config files reject unknown sections and keys") {
  const fs::path d = scratch_dir("config");
  std::ofstream(d / "bad_section.json") << R"({"modle": {}})";
  std::ofstream(d / "bad_key.json") << R"({"verify": {"suit": "cst"}})";
  std::ofstream(d / "not_json.json") << "{";
  for (const char* f : {"bad_section.json", "bad_key.json", "not_json.json"}) {
    const auto r = run({"--config", (d / f).string(), "--out-dir", (d / "o").string(), "verify"});
    CHECK(r.status == 1);
    CHECK(!r.err.empty());
  }
}

TEST_CASE("verify writes a summary and a manifest; flags override the file") {
  const fs::path d = scratch_dir("verify");
  std::ofstream(d / "cfg.json") << R"({"verify": {"suite": "golden"}})";
  const auto r = run({"--config", (d / "cfg.json").string(), "--out-dir", (d / "o").string(),
                      "--seed", "3", "verify", "--suite", "gather"});
  CHECK(r.status == 0);
  CHECK(r.out.find("PASS gather.partition_and_identity") != std::string::npos);
  const auto m = read_manifest(d / "o" / "manifest.json");
  CHECK(m.exit_status == 0);
  CHECK(m.seed == 3);
  CHECK(m.config["verify"]["suite"] == "gather");
  CHECK(fs::exists(d / "o" / "verify_summary.json"));
}

TEST_CASE("train, eval and dump on the tiny configuration; manifest replay is exact") {
  const fs::path d = scratch_dir("train");
  const std::string o1 = (d / "t1").string(), o2 = (d / "t2").string();
  REQUIRE(run({"--out-dir", o1, "--seed", "5", "train", "--tiny", "--steps", "4"}).status == 0);
  CHECK(fs::exists(d / "t1" / "metrics.csv"));
  REQUIRE(run({"--config", o1 + "/manifest.json", "--out-dir", o2, "train"}).status == 0);
  CHECK(slurp(d / "t1" / "checkpoint.isoc") == slurp(d / "t2" / "checkpoint.isoc"));

  const auto e = run({"--out-dir", (d / "e").string(), "--seed", "5", "eval", "--tiny",
                      "--checkpoint", o1 + "/checkpoint.isoc"});
  CHECK(e.status == 0);
  CHECK(e.out.find("mean IoU") != std::string::npos);

  // A checkpoint from a different model is rejected with a named tensor.
  const auto bad = run({"--out-dir", (d / "e2").string(), "eval", "--checkpoint",
                        o1 + "/checkpoint.isoc"});
  CHECK(bad.status == 1);
  CHECK(bad.err.find("stage") != std::string::npos);

  const auto g = run({"--out-dir", (d / "g").string(), "dump", "--tiny", "--what", "cst-gmap",
                      "--checkpoint", o1 + "/checkpoint.isoc"});
  CHECK(g.status == 0);
  CHECK(fs::exists(d / "g" / "cst-gmap_stage1.isot"));
  CHECK(fs::exists(d / "g" / "cst-gmap_stage2.txt"));
  const auto h = run({"--out-dir", (d / "h").string(), "dump", "--tiny", "--what", "sgst-heatmap"});
  CHECK(h.status == 0);
  CHECK(fs::exists(d / "h" / "sgst-heatmap_stage3.isot"));
}

TEST_CASE("cost writes item and summary tables") {
  const fs::path d = scratch_dir("cost");
  const auto r = run({"--out-dir", d.string(), "cost", "--tokens", "256", "--channels", "64",
                      "--ratios", "1/9"});
  CHECK(r.status == 0);
  CHECK(fs::exists(d / "cost_items.csv"));
  CHECK(slurp(d / "cost_summary.csv").find("sgst,256,64,1,29,") != std::string::npos);
}

TEST_CASE("global flags may follow the subcommand") {
  const fs::path d = scratch_dir("fallthrough");
  const auto r = run({"cost", "--tokens", "256", "--channels", "64", "--out-dir", d.string(),
                      "--seed", "9"});
  CHECK(r.status == 0);
  CHECK(read_manifest(d / "manifest.json").seed == 9);
}
