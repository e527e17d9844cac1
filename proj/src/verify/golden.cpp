#include "isomer/verify/golden.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "isomer/blocks/blocks.hpp"
#include "isomer/numerics/ops.hpp"
#include "isomer/numerics/tensor_io.hpp"

namespace isomer::verify {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string file_name(const std::string& tensor) { return tensor + ".isot"; }

const DenseArray& input(const Fixture& f, const std::string& name) {
  auto it = f.inputs.find(name);
  if (it == f.inputs.end()) {
    throw std::invalid_argument("fixture op '" + f.op + "' needs input '" + name + "'");
  }
  return it->second;
}

std::string index_string(const Shape& shape, std::size_t flat) {
  std::string out = "[";
  std::vector<std::size_t> idx(shape.size());
  for (std::size_t d = shape.size(); d-- > 0;) {
    idx[d] = flat % shape[d];
    flat /= shape[d];
  }
  for (std::size_t d = 0; d < idx.size(); ++d) out += (d ? "," : "") + std::to_string(idx[d]);
  return out + "]";
}

}  // namespace

json block_config_to_json(const blocks::BlockConfig& cfg) {
  return {{"tokens", cfg.tokens},
          {"channels", cfg.channels},
          {"heads", cfg.heads},
          {"ffn_ratio", cfg.ffn_ratio},
          {"context_reduction", cfg.context_reduction},
          {"merge_ratio", cfg.merge_ratio.to_string()},
          {"merge_norm", std::string(blocks::to_string(cfg.merge_norm))},
          {"fg_only", cfg.fg_only}};
}

blocks::BlockConfig block_config_from_json(const json& j, const DenseArray* x) {
  blocks::BlockConfig cfg;
  if (x && x->rank() == 2) {
    cfg.tokens = x->rows();
    cfg.channels = x->cols();
  }
  cfg.tokens = j.value("tokens", cfg.tokens);
  cfg.channels = j.value("channels", cfg.channels);
  cfg.heads = j.value("heads", cfg.heads);
  cfg.ffn_ratio = j.value("ffn_ratio", cfg.ffn_ratio);
  cfg.context_reduction = j.value("context_reduction", cfg.context_reduction);
  if (j.contains("merge_ratio")) cfg.merge_ratio = blocks::Ratio::parse(j["merge_ratio"].get<std::string>());
  if (j.contains("merge_norm")) cfg.merge_norm = blocks::parse_merge_norm(j["merge_norm"].get<std::string>());
  cfg.fg_only = j.value("fg_only", cfg.fg_only);
  return cfg;
}

Fixture load_fixture(const fs::path& dir) {
  const fs::path manifest = dir / "fixture.json";
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw FormatError(manifest.string(), 0, "cannot open fixture manifest");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(manifest.string(), e.byte, e.what());
  }
  Fixture f;
  try {
    f.op = j.at("op").get<std::string>();
    f.config = j.value("config", json::object());
    f.tolerance = j.value("tolerance", f.tolerance);
  } catch (const json::exception& e) {
    throw FormatError(manifest.string(), 0, e.what());
  }
  auto load = [&](const std::string& rel) { return load_tensor(dir / rel); };
  try {
    const json inputs = j.value("inputs", json::object());
    const json params = j.value("params", json::object());
    for (const auto& el : inputs.items()) f.inputs[el.key()] = load(el.value().get<std::string>());
    for (const auto& el : params.items()) f.params.set(el.key(), load(el.value().get<std::string>()));
  } catch (const json::exception& e) {
    throw FormatError(manifest.string(), 0, e.what());
  }
  if (!j.contains("expected")) throw FormatError(manifest.string(), 0, "no expected tensor");
  f.expected = load(j["expected"].get<std::string>());
  return f;
}

void save_fixture(const fs::path& dir, const Fixture& f) {
  fs::create_directories(dir);
  json j{{"op", f.op}, {"config", f.config}, {"tolerance", f.tolerance}};
  j["inputs"] = json::object();
  j["params"] = json::object();
  for (const auto& [name, t] : f.inputs) {
    save_tensor(dir / file_name(name), t);
    j["inputs"][name] = file_name(name);
  }
  for (const auto& [name, t] : f.params) {
    save_tensor(dir / file_name("param." + name), t);
    j["params"][name] = file_name("param." + name);
  }
  save_tensor(dir / "expected.isot", f.expected);
  j["expected"] = "expected.isot";
  std::ofstream(dir / "fixture.json") << j.dump(2) << "\n";
}

DenseArray run_fixture_op(const Fixture& f) {
  const std::string& op = f.op;
  if (op == "softmax") return softmax(input(f, "x"), 1);
  if (op == "layernorm") return layernorm(input(f, "x"), input(f, "gamma"), input(f, "beta"), 1);
  if (op == "attention") {
    // Single head, no projections: softmax(q k^T * scale) v.
    const DenseArray& q = input(f, "q");
    const DenseArray& k = input(f, "k");
    const double s = f.config.value("scale", 1.0 / std::sqrt(static_cast<double>(q.cols())));
    return matmul(softmax(scale(matmul_nt(q, k), s), 1), input(f, "v"));
  }
  const DenseArray& x = input(f, "x");
  const blocks::BlockConfig cfg = block_config_from_json(f.config, &x);
  if (op == "mhsa") return blocks::mhsa_forward(x, blocks::ParamView(f.params, "attn."), cfg.heads);
  if (op == "cst_global_context") return blocks::cst_global_context(x, f.params);
  if (op == "vanilla_block") return blocks::vanilla_block_forward(x, f.params, cfg);
  if (op == "cst_block") return blocks::cst_block_forward(x, f.params, cfg);
  if (op == "sgst_block") return blocks::sgst_block_forward(x, f.params, cfg);
  throw std::invalid_argument("unknown fixture op '" + op + "'");
}

CheckReport golden_compare(const fs::path& dir, double tolerance) {
  const Fixture f = load_fixture(dir);
  CheckReport r;
  r.name = "golden." + dir.filename().string();
  r.tolerance = tolerance < 0.0 ? f.tolerance : tolerance;
  r.config = {{"op", f.op}, {"fixture", dir.string()}, {"config", f.config}};
  r.cases = 1;
  const DenseArray got = run_fixture_op(f);
  if (got.shape() != f.expected.shape()) {
    r.pass = false;
    r.detail = "shape " + shape_to_string(got.shape()) + " vs expected " +
               shape_to_string(f.expected.shape());
    return r;
  }
  std::size_t worst = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double abs_err = std::abs(got[i] - f.expected[i]);
    if (!(abs_err <= r.max_abs_err)) {  // also catches NaN
      r.max_abs_err = std::isnan(abs_err) ? INFINITY : abs_err;
      worst = i;
    }
    r.max_rel_err = std::max(r.max_rel_err, abs_err / std::max(std::abs(f.expected[i]), 1e-8));
  }
  r.pass = r.max_abs_err <= r.tolerance;
  if (got.size() > 0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "worst at %s got=%.17g expected=%.17g",
                  index_string(got.shape(), worst).c_str(), got[worst], f.expected[worst]);
    r.detail = buf;
  }
  return r;
}

}  // namespace isomer::verify
