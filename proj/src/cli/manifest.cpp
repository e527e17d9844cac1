#include "isomer/cli/manifest.hpp"

#include <ctime>
#include <fstream>
#include <stdexcept>

namespace isomer::cli {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json to_json(const RunManifest& m) {
  return {{"subcommand", m.subcommand},
          {"config", m.config},
          {"seed", m.seed},
          {"threads", m.threads},
          {"version", m.version},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at.empty() ? nlohmann::json() : nlohmann::json(m.finished_at)},
          {"exit_status", m.exit_status},
          {"outputs", m.outputs}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.subcommand = j.at("subcommand").get<std::string>();
  m.config = j.at("config");
  m.seed = j.value("seed", std::uint64_t{0});
  m.threads = j.value("threads", std::size_t{1});
  m.version = j.value("version", "");
  m.started_at = j.value("started_at", "");
  if (j.contains("finished_at") && j["finished_at"].is_string()) m.finished_at = j["finished_at"];
  m.exit_status = j.value("exit_status", -1);
  m.outputs = j.value("outputs", std::vector<std::string>{});
  return m;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << to_json(m).dump(2) << "\n";
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest " + path.string());
  return manifest_from_json(nlohmann::json::parse(in));
}

bool is_manifest(const nlohmann::json& j) {
  return j.is_object() && j.contains("subcommand") && j.contains("config");
}

}  // namespace isomer::cli
