#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "isomer/blocks/config.hpp"
#include "isomer/blocks/params.hpp"
#include "isomer/verify/report.hpp"

// A golden fixture is a directory holding fixture.json and ISOT tensor files:
//
//   {
//     "op": "cst_global_context",
//     "config": {"tokens": 9, "channels": 8, ...},
//     "inputs": {"x": "x.isot"},
//     "params": {"cst.wg": "cst.wg.isot", ...},
//     "expected": "expected.isot",
//     "tolerance": 1e-10
//   }
//
// Ops: softmax (axis 1), layernorm (x, gamma, beta), attention (q, k, v;
// config "scale"), mhsa, cst_global_context, vanilla_block, cst_block,
// sgst_block.

namespace isomer::verify {

struct Fixture {
  std::string op;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, DenseArray> inputs;
  blocks::ParamSet params;
  DenseArray expected;
  double tolerance = 1e-10;
};

nlohmann::json block_config_to_json(const blocks::BlockConfig& cfg);
/// Missing keys keep their defaults; tokens and channels may be omitted and
/// are then taken from the input "x".
blocks::BlockConfig block_config_from_json(const nlohmann::json& j, const DenseArray* x = nullptr);

/// Throws FormatError naming the file and byte offset on missing or corrupt
/// fixture files.
Fixture load_fixture(const std::filesystem::path& dir);
void save_fixture(const std::filesystem::path& dir, const Fixture& f);

/// Runs the named op through the library's fast path.
DenseArray run_fixture_op(const Fixture& f);

/// Compares run_fixture_op against the expected tensor. tolerance < 0 uses
/// the fixture's own tolerance. The detail names the worst element.
CheckReport golden_compare(const std::filesystem::path& dir, double tolerance = -1.0);

}  // namespace isomer::verify
