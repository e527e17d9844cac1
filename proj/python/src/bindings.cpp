#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "isomer/blocks/blocks.hpp"
#include "isomer/blocks/schema.hpp"
#include "isomer/blocks/sgst.hpp"
#include "isomer/cli/commands.hpp"
#include "isomer/cost/cost.hpp"
#include "isomer/numerics/ops.hpp"
#include "isomer/numerics/rng.hpp"
#include "isomer/pipeline/config.hpp"
#include "isomer/pipeline/train.hpp"
#include "isomer/verify/golden.hpp"
#include "isomer/verify/suites.hpp"

namespace py = pybind11;
using isomer::DenseArray;
using isomer::blocks::BlockKind;
using isomer::blocks::ParamSet;
using nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseArray to_dense(const Array& a) {
  isomer::Shape shape(a.shape(), a.shape() + a.ndim());
  return DenseArray(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_numpy(const DenseArray& d) {
  Array out(std::vector<py::ssize_t>(d.shape().begin(), d.shape().end()));
  std::copy(d.data().begin(), d.data().end(), out.mutable_data());
  return out;
}

ParamSet to_params(const py::dict& d) {
  ParamSet p;
  for (const auto& [k, v] : d) p.set(py::cast<std::string>(k), to_dense(py::cast<Array>(v)));
  return p;
}

py::dict to_dict(const ParamSet& p) {
  py::dict d;
  for (const auto& [k, v] : p) d[py::str(k)] = to_numpy(v);
  return d;
}

isomer::blocks::BlockConfig block_config(const std::string& config_json, const DenseArray* x) {
  auto cfg = isomer::verify::block_config_from_json(json::parse(config_json), x);
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Isomer fusion blocks (native core)";

  py::register_exception<isomer::blocks::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<isomer::DimensionError>(m, "DimensionError", PyExc_ValueError);

  m.def("set_num_threads", &isomer::set_num_threads);

  m.def("softmax", [](const Array& x, std::size_t axis) { return to_numpy(isomer::softmax(to_dense(x), axis)); });
  m.def("layernorm", [](const Array& x, const Array& gamma, const Array& beta, std::size_t axis) {
    return to_numpy(isomer::layernorm(to_dense(x), to_dense(gamma), to_dense(beta), axis));
  });

  m.def("block_config", [](const std::string& config_json) {
    return isomer::verify::block_config_to_json(block_config(config_json, nullptr)).dump();
  });

  m.def("init_block_params", [](const std::string& kind, const std::string& config_json, std::uint64_t seed) {
    isomer::Rng rng(seed);
    const auto k = isomer::blocks::parse_block_kind(kind);
    return to_dict(isomer::blocks::init_params(isomer::blocks::block_schema(k, block_config(config_json, nullptr)), rng));
  });

  m.def("block_forward", [](const std::string& kind, const Array& x, const py::dict& params,
                            const std::string& config_json) {
    const DenseArray xd = to_dense(x);
    const ParamSet p = to_params(params);
    const auto cfg = block_config(config_json, &xd);
    DenseArray y;
    {
      py::gil_scoped_release release;
      y = isomer::blocks::block_forward(isomer::blocks::parse_block_kind(kind), xd, p, cfg);
    }
    return to_numpy(y);
  });

  m.def("block_backward", [](const std::string& kind, const Array& x, const py::dict& params,
                             const std::string& config_json, const Array& dout) {
    const DenseArray xd = to_dense(x);
    const ParamSet p = to_params(params);
    const auto cfg = block_config(config_json, &xd);
    const auto k = isomer::blocks::parse_block_kind(kind);
    isomer::blocks::BlockCache cache;
    isomer::blocks::block_forward(k, xd, p, cfg, &cache);
    ParamSet grads = p.zeros_like();
    const DenseArray dx = isomer::blocks::block_backward(k, cache, to_dense(dout), p, cfg, grads);
    return py::make_tuple(to_numpy(dx), to_dict(grads));
  });

  m.def("cst_weight_map", [](const Array& x, const py::dict& params) {
    return to_numpy(isomer::blocks::cst_weight_map(to_dense(x), to_params(params)));
  });
  m.def("cst_global_context", [](const Array& x, const py::dict& params) {
    return to_numpy(isomer::blocks::cst_global_context(to_dense(x), to_params(params)));
  });
  m.def("sgst_heatmap", [](const Array& x, const py::dict& params) {
    return to_numpy(isomer::blocks::sgst_block_heatmap(to_dense(x), to_params(params)));
  });

  m.def("block_cost", [](const std::string& kind, const std::string& config_json, std::size_t n_fg) {
    const auto r = isomer::cost::block_cost(isomer::blocks::parse_block_kind(kind),
                                            block_config(config_json, nullptr), n_fg);
    json items = json::object();
    for (const auto& it : r.items) items[it.name] = it.flops;
    return json{{"block", r.block},
                {"tokens", r.tokens},
                {"channels", r.channels},
                {"heads", r.heads},
                {"merged", r.merged},
                {"items", items},
                {"total", r.total()},
                {"mhsa_portion", r.mhsa_portion()},
                {"attention_portion", r.attention_portion()},
                {"attention_stage", r.attention_stage()},
                {"peak_elements", r.peak_elements}}
        .dump();
  });

  m.def("run_suite", [](const std::string& name, std::uint64_t seed, std::size_t gradient_seeds) {
    isomer::verify::SuiteOptions opts;
    opts.seed = seed;
    opts.gradient_seeds = gradient_seeds;
    std::vector<isomer::verify::CheckReport> reports;
    {
      py::gil_scoped_release release;
      reports = isomer::verify::run_suite(name, opts);
    }
    json out = json::array();
    for (const auto& r : reports) out.push_back(isomer::verify::to_json(r));
    return out.dump();
  });

  m.def("model_config", [](const std::string& config_json, bool tiny) {
    const auto base = tiny ? isomer::pipeline::tiny_config() : isomer::pipeline::IsomerConfig{};
    const auto cfg = isomer::pipeline::config_from_json(json::parse(config_json), base);
    cfg.validate();
    return isomer::pipeline::to_json(cfg).dump();
  });

  m.def("train", [](const std::string& config_json, bool tiny) {
    const auto base = tiny ? isomer::pipeline::tiny_config() : isomer::pipeline::IsomerConfig{};
    const auto cfg = isomer::pipeline::config_from_json(json::parse(config_json), base);
    cfg.validate();
    isomer::pipeline::TrainResult result;
    {
      py::gil_scoped_release release;
      result = isomer::pipeline::train(cfg);
    }
    py::list losses, ious;
    for (const auto& row : result.metrics) {
      losses.append(row.loss);
      ious.append(row.iou);
    }
    py::dict out;
    out["params"] = to_dict(result.params);
    out["loss"] = losses;
    out["iou"] = ious;
    out["frame_iou"] = result.final_eval.frame_iou;
    out["mean_iou"] = result.final_eval.mean_iou;
    return out;
  });

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<const char*> argv{"isomer"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int status;
    {
      py::gil_scoped_release release;
      status = isomer::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    }
    return py::make_tuple(status, out.str(), err.str());
  });
}
