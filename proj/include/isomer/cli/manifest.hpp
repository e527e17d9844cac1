#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace isomer::cli {

/// Record of one tool invocation, written to <out-dir>/manifest.json before
/// any work starts and rewritten with the end time and outputs when done.
struct RunManifest {
  std::string subcommand;
  nlohmann::json config = nlohmann::json::object();  // resolved: file, then flags
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string version;
  std::string started_at;   // UTC, ISO 8601
  std::string finished_at;  // empty while running
  int exit_status = -1;
  std::vector<std::string> outputs;
};

std::string utc_timestamp();

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

/// True when `j` looks like a manifest (has "subcommand" and "config").
bool is_manifest(const nlohmann::json& j);

}  // namespace isomer::cli
