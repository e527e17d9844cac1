#include "isomer/blocks/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "isomer/numerics/tensor_io.hpp"

namespace isomer::blocks {

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::string& source, std::uint64_t offset) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw FormatError(source, offset, "truncated checkpoint header");
  }
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& os, const ParamSet& params) {
  nlohmann::json entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, value] : params) {
    const std::uint64_t bytes = tensor_record_size(value);
    entries.push_back({{"name", name}, {"shape", value.shape()}, {"offset", offset},
                       {"bytes", bytes}});
    offset += bytes;
  }
  const std::string manifest = nlohmann::json{{"tensors", entries}}.dump();
  os.write(kCheckpointMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, manifest.size());
  os.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  for (const auto& [name, value] : params) write_tensor(os, value);
  if (!os) throw std::runtime_error("checkpoint write failed");
}

ParamSet read_checkpoint(std::istream& is, const std::string& source) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError(source, 0, "not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(is, source, 4);
  if (version != kVersion) {
    throw FormatError(source, 4, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto length = get<std::uint64_t>(is, source, 8);
  std::string text(length, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(length))) {
    throw FormatError(source, 16, "truncated manifest");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source, 16, std::string("bad manifest: ") + e.what());
  }

  const std::uint64_t base = 16 + length;
  ParamSet out;
  std::uint64_t offset = 0;
  for (const auto& entry : manifest.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<Shape>();
    if (entry.at("offset").get<std::uint64_t>() != offset) {
      throw FormatError(source, base + offset, "manifest offset mismatch for '" + name + "'");
    }
    DenseArray value;
    try {
      value = read_tensor(is, source);
    } catch (const FormatError& e) {
      throw FormatError(source, e.offset(), "in tensor '" + name + "': " + e.what());
    }
    if (value.shape() != shape) {
      throw FormatError(source, base + offset,
                        "tensor '" + name + "' shape disagrees with manifest");
    }
    offset += tensor_record_size(value);
    out.set(name, std::move(value));
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(os, params);
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_checkpoint(is, path.string());
}

}  // namespace isomer::blocks
