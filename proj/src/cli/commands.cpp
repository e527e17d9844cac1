#include "isomer/cli/commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "isomer/blocks/blocks.hpp"
#include "isomer/blocks/checkpoint.hpp"
#include "isomer/blocks/schema.hpp"
#include "isomer/cli/bench.hpp"
#include "isomer/cli/manifest.hpp"
#include "isomer/cost/cost.hpp"
#include "isomer/numerics/ops.hpp"
#include "isomer/numerics/rng.hpp"
#include "isomer/numerics/tensor_io.hpp"
#include "isomer/pipeline/model.hpp"
#include "isomer/pipeline/train.hpp"
#include "isomer/verify/suites.hpp"

#ifndef ISOMER_VERSION
#define ISOMER_VERSION "dev"
#endif

namespace isomer::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using blocks::BlockKind;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kSections = {"model", "bench", "cost", "verify", "eval", "dump"};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "isomer_out";
  std::size_t threads = 1;
};

/// Config file contents by section; a manifest contributes its config and seed.
struct FileConfig {
  json sections = json::object();
  std::optional<std::uint64_t> seed;
};

FileConfig load_config_file(const std::string& path) {
  FileConfig fc;
  if (path.empty()) return fc;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + " @" + std::to_string(e.byte) + ": " + e.what());
  }
  if (is_manifest(j)) {
    fc.seed = j.value("seed", std::uint64_t{0});
    j = j["config"];
  }
  if (!j.is_object()) throw blocks::ConfigError(path + ": expected a JSON object");
  for (const auto& el : j.items()) {
    if (std::find(kSections.begin(), kSections.end(), el.key()) == kSections.end()) {
      throw blocks::ConfigError(path + ": unknown section '" + el.key() + "'");
    }
  }
  fc.sections = j;
  return fc;
}

json section(const FileConfig& fc, const std::string& name) {
  return fc.sections.value(name, json::object());
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& el : j.items()) {
    bool ok = false;
    for (const char* k : keys) ok = ok || el.key() == k;
    if (!ok) throw blocks::ConfigError(where + ": unknown key '" + el.key() + "'");
  }
}

std::vector<BlockKind> parse_blocks(const std::vector<std::string>& names) {
  std::vector<BlockKind> out;
  for (const auto& n : names) out.push_back(blocks::parse_block_kind(n));
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

class Run {
 public:
  Run(std::string subcommand, const Globals& g, std::ostream& out)
      : dir_(g.out_dir), out_(out) {
    m_.subcommand = std::move(subcommand);
    m_.threads = g.threads;
    m_.version = ISOMER_VERSION;
  }

  void start(json config, std::uint64_t seed) {
    m_.config = std::move(config);
    m_.seed = seed;
    m_.started_at = utc_timestamp();
    fs::create_directories(dir_);
    write_manifest(dir_ / "manifest.json", m_);
  }

  fs::path output(const std::string& name) {
    m_.outputs.push_back((dir_ / name).string());
    return dir_ / name;
  }

  int finish(int status) {
    m_.finished_at = utc_timestamp();
    m_.exit_status = status;
    write_manifest(dir_ / "manifest.json", m_);
    out_ << "manifest: " << (dir_ / "manifest.json").string() << "\n";
    return status;
  }

 private:
  RunManifest m_;
  fs::path dir_;
  std::ostream& out_;
};

// ---- model config ----------------------------------------------------------------

struct ModelFlags {
  std::optional<std::size_t> steps;
  std::optional<double> lr;
  std::optional<std::string> assignment;
  std::optional<std::size_t> resolution;
  std::optional<std::size_t> frames;
  bool tiny = false;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--steps", f.steps, "training steps");
  cmd->add_option("--lr", f.lr, "AdamW learning rate");
  cmd->add_option("--assignment", f.assignment, "stage blocks, e.g. cst,cst,sgst,sgst");
  cmd->add_option("--resolution", f.resolution, "input side (multiple of 32)");
  cmd->add_option("--frames", f.frames, "frames per synthetic clip");
  cmd->add_flag("--tiny", f.tiny, "start from the 32x32, 8-channel test configuration");
}

pipeline::IsomerConfig resolve_model(const FileConfig& fc, const Globals& g, const ModelFlags& f) {
  pipeline::IsomerConfig base = f.tiny ? pipeline::tiny_config() : pipeline::IsomerConfig{};
  pipeline::IsomerConfig cfg = pipeline::config_from_json(section(fc, "model"), base);
  if (f.steps) cfg.steps = *f.steps;
  if (f.lr) cfg.lr = *f.lr;
  if (f.assignment) cfg.assignment = pipeline::parse_assignment(*f.assignment);
  if (f.resolution) cfg.resolution = *f.resolution;
  if (f.frames) cfg.frames = *f.frames;
  const auto seed = g.seed ? g.seed : fc.seed;
  if (seed) {
    cfg.data_seed = *seed;
    cfg.init_seed = *seed + 1;
  }
  cfg.validate();
  return cfg;
}

// ---- verify ------------------------------------------------------------------------

struct VerifyFlags {
  std::optional<std::string> suite;
  std::optional<std::size_t> gradient_seeds;
  std::optional<std::string> fixtures;
};

int cmd_verify(const Globals& g, const FileConfig& fc, const VerifyFlags& f, std::ostream& out) {
  json sec = section(fc, "verify");
  reject_unknown(sec, {"suite", "gradient_seeds", "fixture_dir"}, "verify");
  verify::SuiteOptions opts;
  std::string suite = sec.value("suite", "all");
  opts.gradient_seeds = sec.value("gradient_seeds", opts.gradient_seeds);
  opts.fixture_dir = sec.value("fixture_dir", verify::default_fixture_dir().string());
  if (f.suite) suite = *f.suite;
  if (f.gradient_seeds) opts.gradient_seeds = *f.gradient_seeds;
  if (f.fixtures) opts.fixture_dir = *f.fixtures;
  opts.seed = g.seed.value_or(fc.seed.value_or(opts.seed));
  if (!verify::is_suite(suite)) {
    throw UsageError("unknown suite '" + suite + "'; expected one of: all," +
                     join(verify::suite_names()));
  }

  Run run("verify", g, out);
  run.start({{"verify",
              {{"suite", suite},
               {"gradient_seeds", opts.gradient_seeds},
               {"fixture_dir", opts.fixture_dir.string()}}}},
            opts.seed);
  const auto reports = verify::run_suite(suite, opts);
  std::ofstream text(run.output("verify_report.txt"));
  for (const auto& r : reports) {
    const std::string line = verify::format_line(r);
    out << line << "\n";
    text << line << "\n";
  }
  std::ofstream(run.output("verify_summary.json")) << verify::summary_json(reports).dump(2) << "\n";
  const bool ok = verify::all_pass(reports);
  out << (ok ? "all checks passed" : "some checks FAILED") << " (" << reports.size() << ")\n";
  return run.finish(ok ? 0 : 1);
}

// ---- bench -------------------------------------------------------------------------

struct BenchFlags {
  std::vector<std::string> blocks;
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> channels;
  std::optional<std::size_t> heads, repeats, warmups;
  std::optional<std::string> merge_ratio;
  std::optional<std::uint64_t> max_elements;
};

int cmd_bench(const Globals& g, const FileConfig& fc, const BenchFlags& f, std::ostream& out) {
  json sec = section(fc, "bench");
  reject_unknown(sec, {"blocks", "tokens", "channels", "heads", "merge_ratio", "repeats", "warmups",
                       "max_elements"},
                 "bench");
  BenchOptions opts;
  std::vector<std::string> names = sec.value("blocks", std::vector<std::string>{"vt", "cst", "sgst"});
  opts.tokens = sec.value("tokens", opts.tokens);
  opts.channels = sec.value("channels", opts.channels);
  opts.heads = sec.value("heads", opts.heads);
  if (sec.contains("merge_ratio")) opts.merge_ratio = blocks::Ratio::parse(sec["merge_ratio"].get<std::string>());
  opts.repeats = sec.value("repeats", opts.repeats);
  opts.warmups = sec.value("warmups", opts.warmups);
  opts.max_elements = sec.value("max_elements", opts.max_elements);
  if (!f.blocks.empty()) names = f.blocks;
  if (!f.tokens.empty()) opts.tokens = f.tokens;
  if (!f.channels.empty()) opts.channels = f.channels;
  if (f.heads) opts.heads = *f.heads;
  if (f.merge_ratio) opts.merge_ratio = blocks::Ratio::parse(*f.merge_ratio);
  if (f.repeats) opts.repeats = *f.repeats;
  if (f.warmups) opts.warmups = *f.warmups;
  if (f.max_elements) opts.max_elements = *f.max_elements;
  opts.blocks = parse_blocks(names);
  opts.seed = g.seed.value_or(fc.seed.value_or(opts.seed));
  if (opts.repeats == 0) throw UsageError("--repeats must be at least 1");
  for (auto k : opts.blocks)
    for (auto n : opts.tokens)
      for (auto c : opts.channels) check_memory_cap(k, n, c, opts);

  Run run("bench", g, out);
  run.start({{"bench",
              {{"blocks", names},
               {"tokens", opts.tokens},
               {"channels", opts.channels},
               {"heads", opts.heads},
               {"merge_ratio", opts.merge_ratio.to_string()},
               {"repeats", opts.repeats},
               {"warmups", opts.warmups},
               {"max_elements", opts.max_elements}}}},
            opts.seed);
  const auto rows = run_bench(opts);
  std::ofstream csv(run.output("bench.csv"));
  write_bench_csv(csv, rows);
  write_bench_csv(out, rows);
  return run.finish(0);
}

// ---- cost ---------------------------------------------------------------------------

struct CostFlags {
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> channels;
  std::vector<std::string> ratios;
  std::optional<std::size_t> heads, context_reduction;
};

int cmd_cost(const Globals& g, const FileConfig& fc, const CostFlags& f, std::ostream& out) {
  json sec = section(fc, "cost");
  reject_unknown(sec, {"tokens", "channels", "ratios", "heads", "context_reduction"}, "cost");
  cost::SweepGrid grid = cost::default_sweep_grid();
  grid.tokens = sec.value("tokens", grid.tokens);
  grid.channels = sec.value("channels", grid.channels);
  grid.heads = sec.value("heads", grid.heads);
  grid.context_reduction = sec.value("context_reduction", grid.context_reduction);
  std::vector<std::string> ratios;
  for (const auto& r : grid.ratios) ratios.push_back(r.to_string());
  ratios = sec.value("ratios", ratios);
  if (!f.tokens.empty()) grid.tokens = f.tokens;
  if (!f.channels.empty()) grid.channels = f.channels;
  if (!f.ratios.empty()) ratios = f.ratios;
  if (f.heads) grid.heads = *f.heads;
  if (f.context_reduction) grid.context_reduction = *f.context_reduction;
  grid.ratios.clear();
  for (const auto& r : ratios) grid.ratios.push_back(blocks::Ratio::parse(r));

  Run run("cost", g, out);
  run.start({{"cost",
              {{"tokens", grid.tokens},
               {"channels", grid.channels},
               {"ratios", ratios},
               {"heads", grid.heads},
               {"context_reduction", grid.context_reduction}}}},
            g.seed.value_or(0));
  const auto rows = cost::cost_sweep(grid);
  std::ofstream items(run.output("cost_items.csv"));
  cost::write_items_csv(items, rows);
  std::ofstream summary(run.output("cost_summary.csv"));
  cost::write_summary_csv(summary, rows);
  cost::write_summary_csv(out, rows);
  return run.finish(0);
}

// ---- train / eval -------------------------------------------------------------------------

int cmd_train(const Globals& g, const FileConfig& fc, const ModelFlags& f, std::ostream& out) {
  const auto cfg = resolve_model(fc, g, f);
  Run run("train", g, out);
  run.start({{"model", pipeline::to_json(cfg)}}, cfg.data_seed);
  std::ofstream metrics(run.output("metrics.csv"));
  pipeline::write_metrics_header(metrics);
  const std::size_t every = std::max<std::size_t>(1, cfg.steps / 10);
  const auto result = pipeline::train(cfg, [&](const pipeline::MetricsRow& row) {
    pipeline::write_metrics_row(metrics, row);
    if (row.step % every == 0 || row.step == cfg.steps) {
      out << "step " << row.step << " loss " << row.loss << " iou " << row.iou << "\n";
    }
  });
  metrics.close();
  blocks::save_checkpoint(run.output("checkpoint.isoc"), result.params);
  out << "final train IoU " << std::setprecision(6) << result.final_eval.mean_iou << "\n";
  return run.finish(0);
}

struct EvalFlags {
  ModelFlags model;
  std::string checkpoint;
  std::optional<std::uint64_t> clip_seed;
};

int cmd_eval(const Globals& g, const FileConfig& fc, const EvalFlags& f, std::ostream& out) {
  json sec = section(fc, "eval");
  reject_unknown(sec, {"checkpoint", "clip_seed"}, "eval");
  pipeline::IsomerConfig cfg = resolve_model(fc, g, f.model);
  std::string checkpoint = sec.value("checkpoint", "");
  if (!f.checkpoint.empty()) checkpoint = f.checkpoint;
  if (checkpoint.empty()) throw UsageError("eval needs --checkpoint");
  if (sec.contains("clip_seed")) cfg.data_seed = sec["clip_seed"].get<std::uint64_t>();
  if (f.clip_seed) cfg.data_seed = *f.clip_seed;

  Run run("eval", g, out);
  run.start({{"model", pipeline::to_json(cfg)},
             {"eval", {{"checkpoint", checkpoint}, {"clip_seed", cfg.data_seed}}}},
            cfg.data_seed);
  const auto params = blocks::load_checkpoint(checkpoint);
  blocks::check_schema(params, pipeline::model_schema(cfg));
  const auto clip = pipeline::synth_clip(cfg);
  const auto result = pipeline::evaluate(params, clip, cfg);
  std::ofstream csv(run.output("eval.csv"));
  csv << "frame,iou\n";
  for (std::size_t i = 0; i < result.frame_iou.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, result.frame_iou[i]);
    csv << buf;
    out << "frame " << i << " IoU " << result.frame_iou[i] << "\n";
  }
  out << "mean IoU " << result.mean_iou << "\n";
  return run.finish(0);
}

// ---- dump -----------------------------------------------------------------------------------

struct DumpFlags {
  ModelFlags model;
  std::optional<std::string> what;
  std::optional<std::string> checkpoint;
  std::optional<std::size_t> frame;
};

void save_both(Run& run, const std::string& stem, const DenseArray& a) {
  save_tensor(run.output(stem + ".isot"), a);
  save_tensor_text(run.output(stem + ".txt"), a);
}

int cmd_dump(const Globals& g, const FileConfig& fc, const DumpFlags& f, std::ostream& out) {
  json sec = section(fc, "dump");
  reject_unknown(sec, {"what", "checkpoint", "frame"}, "dump");
  const pipeline::IsomerConfig cfg = resolve_model(fc, g, f.model);
  std::string what = sec.value("what", "cst-gmap");
  std::string checkpoint = sec.value("checkpoint", "");
  std::size_t frame = sec.value("frame", std::size_t{0});
  if (f.what) what = *f.what;
  if (f.checkpoint) checkpoint = *f.checkpoint;
  if (f.frame) frame = *f.frame;
  if (what != "cst-gmap" && what != "sgst-heatmap" && what != "attn-matrix") {
    throw UsageError("unknown dump kind '" + what + "'; expected cst-gmap, sgst-heatmap or attn-matrix");
  }
  if (frame >= cfg.frames) throw UsageError("--frame out of range");

  Run run("dump", g, out);
  run.start({{"model", pipeline::to_json(cfg)},
             {"dump", {{"what", what}, {"checkpoint", checkpoint}, {"frame", frame}}}},
            cfg.data_seed);
  blocks::ParamSet params = checkpoint.empty() ? pipeline::init_model(cfg) : blocks::load_checkpoint(checkpoint);
  blocks::check_schema(params, pipeline::model_schema(cfg));
  const auto clip = pipeline::synth_clip(cfg);
  const auto& fr = clip.frames.at(frame);

  std::size_t written = 0;
  for (std::size_t l = 1; l <= pipeline::kStages; ++l) {
    const auto bc = cfg.stage_config(l);
    const std::size_t side = cfg.stage_side(l);
    const std::string prefix = pipeline::stage_prefix(l);
    const DenseArray x = blocks::mix(fr.appearance.stages[l - 1].token_view(),
                                     fr.motion.stages[l - 1].token_view(),
                                     blocks::ParamView(params, prefix + "mix."));
    const blocks::ParamView bp(params, prefix + "block.");
    const std::string stem = what + "_stage" + std::to_string(l);
    const BlockKind kind = cfg.stage_kind(l);
    if (what == "cst-gmap" && kind == BlockKind::kCst) {
      const DenseArray u = layernorm(x, bp["ln1.gamma"], bp["ln1.beta"], 1);
      save_both(run, stem, blocks::cst_weight_map(u, bp).reshaped({side, side}));
      ++written;
    } else if (what == "sgst-heatmap" && kind == BlockKind::kSgst) {
      save_both(run, stem, blocks::sgst_block_heatmap(x, bp).reshaped({side, side}));
      ++written;
    } else if (what == "attn-matrix" && kind != BlockKind::kCst) {
      // Self-attention weights of the stage's attention projections over
      // LN1 of its tokens (SGST stages: the weights as a vanilla block).
      const DenseArray u = layernorm(x, bp["ln1.gamma"], bp["ln1.beta"], 1);
      for (std::size_t h = 0; h < bc.heads; ++h) {
        save_both(run, stem + "_head" + std::to_string(h),
                  blocks::attention_matrix(u, bp.sub("attn."), bc.heads, h));
        ++written;
      }
    }
  }
  out << "wrote " << written << " tensor(s) as .isot and .txt under " << g.out_dir << "\n";
  if (written == 0) out << "no stage of the configured assignment has a matching block\n";
  return run.finish(0);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Isomer fusion blocks: verification, cost tables, benchmarks, toy training"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may also follow the subcommand
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file or a previous manifest.json");
  app.add_option("--seed", g.seed, "base seed (model: data_seed = S, init_seed = S + 1)");
  app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "numerics worker threads")->capture_default_str()
      ->check(CLI::PositiveNumber);

  VerifyFlags vf;
  auto* verify_cmd = app.add_subcommand("verify", "run verification suites");
  verify_cmd->add_option("--suite", vf.suite,
                         "all, " + join(verify::suite_names()));
  verify_cmd->add_option("--gradient-seeds", vf.gradient_seeds, "seeds per gradient check");
  verify_cmd->add_option("--fixtures", vf.fixtures, "golden fixture directory");

  BenchFlags bf;
  auto* bench_cmd = app.add_subcommand("bench", "time block forwards");
  bench_cmd->add_option("--blocks", bf.blocks, "vt,cst,sgst")->delimiter(',');
  bench_cmd->add_option("--tokens", bf.tokens, "N values")->delimiter(',');
  bench_cmd->add_option("--channels", bf.channels, "C values")->delimiter(',');
  bench_cmd->add_option("--heads", bf.heads, "attention heads");
  bench_cmd->add_option("--merge-ratio", bf.merge_ratio, "SGST K/N, e.g. 1/9");
  bench_cmd->add_option("--repeats", bf.repeats, "timed repeats (median over these)");
  bench_cmd->add_option("--warmups", bf.warmups, "untimed warmup runs");
  bench_cmd->add_option("--max-elements", bf.max_elements, "memory cap in doubles per intermediate");

  CostFlags cf;
  auto* cost_cmd = app.add_subcommand("cost", "analytic FLOP tables");
  cost_cmd->add_option("--tokens", cf.tokens, "N values")->delimiter(',');
  cost_cmd->add_option("--channels", cf.channels, "C values")->delimiter(',');
  cost_cmd->add_option("--ratios", cf.ratios, "SGST K/N values")->delimiter(',');
  cost_cmd->add_option("--heads", cf.heads, "attention heads");
  cost_cmd->add_option("--context-reduction", cf.context_reduction, "CST r_c");

  ModelFlags tf;
  auto* train_cmd = app.add_subcommand("train", "train the toy pipeline on a synthetic clip");
  add_model_flags(train_cmd, tf);

  EvalFlags ef;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_model_flags(eval_cmd, ef.model);
  eval_cmd->add_option("--checkpoint", ef.checkpoint, "checkpoint file");
  eval_cmd->add_option("--clip-seed", ef.clip_seed, "seed of the evaluation clip");

  DumpFlags df;
  auto* dump_cmd = app.add_subcommand("dump", "export attention artifacts");
  add_model_flags(dump_cmd, df.model);
  dump_cmd->add_option("--what", df.what, "cst-gmap, sgst-heatmap or attn-matrix");
  dump_cmd->add_option("--checkpoint", df.checkpoint, "checkpoint (default: fresh init)");
  dump_cmd->add_option("--frame", df.frame, "frame index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    set_num_threads(g.threads);
    const FileConfig fc = load_config_file(g.config_path);
    if (active == verify_cmd) return cmd_verify(g, fc, vf, out);
    if (active == bench_cmd) return cmd_bench(g, fc, bf, out);
    if (active == cost_cmd) return cmd_cost(g, fc, cf, out);
    if (active == train_cmd) return cmd_train(g, fc, tf, out);
    if (active == eval_cmd) return cmd_eval(g, fc, ef, out);
    if (active == dump_cmd) return cmd_dump(g, fc, df, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << active->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace isomer::cli
