// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance [--only N[,N...]] [--seed S]

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "isomer/cli/bench.hpp"
#include "isomer/numerics/ops.hpp"
#include "isomer/pipeline/config.hpp"
#include "isomer/pipeline/train.hpp"
#include "isomer/verify/suites.hpp"

namespace {

using isomer::verify::CheckReport;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome from_reports(const std::vector<CheckReport>& reports) {
  Outcome o{true, ""};
  for (const auto& r : reports) {
    o.pass = o.pass && r.pass;
    if (!o.detail.empty()) o.detail += "; ";
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s %s max_rel=%.2e", r.name.c_str(), r.pass ? "ok" : "FAILED",
                  r.max_rel_err);
    o.detail += buf;
    if (!r.pass && !r.detail.empty()) o.detail += " (" + r.detail + ")";
  }
  return o;
}

Outcome from_report(const CheckReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s max_abs=%.3e max_rel=%.3e tol=%.1e cases=%zu", r.name.c_str(),
                r.max_abs_err, r.max_rel_err, r.tolerance, r.cases);
  std::string detail = buf;
  if (!r.detail.empty()) detail += "; " + r.detail;
  return {r.pass, detail};
}

Outcome overfit(std::uint64_t seed) {
  isomer::pipeline::IsomerConfig cfg;
  cfg.data_seed = seed;
  cfg.init_seed = seed + 1;
  if (cfg.steps > 2000) return {false, "default config trains more than 2000 steps"};
  const auto a = isomer::pipeline::train(cfg);
  const auto b = isomer::pipeline::train(cfg);
  const bool same = a.params == b.params && a.final_eval.mean_iou == b.final_eval.mean_iou;
  const double iou = a.final_eval.mean_iou;
  char buf[160];
  std::snprintf(buf, sizeof buf, "steps=%zu train IoU=%.6f (need > 0.95); repeat run %s", cfg.steps,
                iou, same ? "bitwise identical" : "DIFFERS");
  return {iou > 0.95 && same, buf};
}

Outcome relative_speed(std::uint64_t seed) {
  isomer::set_num_threads(1);
  isomer::cli::BenchOptions opts;
  opts.tokens = {4096};
  opts.channels = {256};
  opts.repeats = 5;
  opts.warmups = 1;
  opts.seed = seed;
  const auto rows = isomer::cli::run_bench(opts);
  const auto& vt = rows.at(0);
  const auto& cst = rows.at(1);
  const auto& sgst = rows.at(2);
  const double cst_ratio = cst.forward.median / vt.forward.median;
  const double sgst_ratio = sgst.attention.median / vt.attention.median;
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "N=4096 C=256 1 thread: CST/vanilla forward %.3f (need < 0.2), SGST/vanilla "
                "attention %.3f (need <= 1/3); medians vt %.3fs cst %.3fs, attention vt %.3fs "
                "sgst %.3fs",
                cst_ratio, sgst_ratio, vt.forward.median, cst.forward.median, vt.attention.median,
                sgst.attention.median);
  return {cst_ratio < 0.2 && sgst_ratio <= 1.0 / 3.0, buf};
}

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome(std::uint64_t)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Isomer acceptance criteria"};
  std::vector<int> only;
  std::uint64_t seed = 1;
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--seed", seed, "base seed");
  CLI11_PARSE(app, argc, argv);

  namespace v = isomer::verify;
  const std::vector<Criterion> criteria = {
      {1, "flop_reduction", [](std::uint64_t) { return from_report(v::check_mhsa_reduction()); }},
      {2, "oracle_equivalence",
       [](std::uint64_t s) { return from_report(v::check_oracle_equivalence(s, 50)); }},
      {3, "cst_construction",
       [](std::uint64_t s) { return from_report(v::check_cst_construction(s, 30)); }},
      {4, "sgst_reduction_to_vanilla",
       [](std::uint64_t s) { return from_report(v::check_sgst_reduction(s, 10)); }},
      {5, "gradient_suite",
       [](std::uint64_t s) { return from_reports(v::check_gradients(s, 20)); }},
      {6, "gather_scatter_bijection",
       [](std::uint64_t s) { return from_report(v::check_gather_scatter(s, 1000)); }},
      {7, "toy_overfit", overfit},
      {8, "relative_speed", relative_speed},
      {9, "flop_counter_cross_validation",
       [](std::uint64_t s) { return from_reports(v::check_flop_counts(s, 5)); }},
  };

  const std::set<int> selected(only.begin(), only.end());
  bool all = true;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(seed);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all = all && o.pass;
    std::printf("%s %d %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
