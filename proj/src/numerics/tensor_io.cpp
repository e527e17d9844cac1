#include "isomer/numerics/tensor_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace isomer {

FormatError::FormatError(std::string source, std::uint64_t offset, const std::string& what)
    : std::runtime_error(source + " @" + std::to_string(offset) + ": " + what),
      source_(std::move(source)),
      offset_(offset) {}

namespace {

template <typename T>
void put_le(std::ostream& os, T v) {
  std::array<char, sizeof(T)> buf;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  }
  os.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& is, const std::string& source, std::uint64_t offset, const char* field) {
  std::array<unsigned char, sizeof(T)> buf;
  is.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (is.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw FormatError(source, offset, std::string("truncated ") + field);
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

std::uint64_t tensor_record_size(const DenseArray& a) {
  return 8 + 8 * a.rank() + 8 * a.size();
}

void write_tensor(std::ostream& os, const DenseArray& a) {
  os.write(kTensorMagic, 4);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(a.rank()));
  for (std::size_t d : a.shape()) put_le<std::uint64_t>(os, d);
  for (double v : a.data()) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw std::runtime_error("write_tensor: stream failure");
}

DenseArray read_tensor(std::istream& is, const std::string& source) {
  const auto start = is.tellg();
  const std::uint64_t base = start < 0 ? 0 : static_cast<std::uint64_t>(start);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4) throw FormatError(source, base, "truncated magic");
  if (std::memcmp(magic, kTensorMagic, 4) != 0) throw FormatError(source, base, "bad magic");
  const auto rank = get_le<std::uint32_t>(is, source, base + 4, "rank");
  if (rank > kMaxRank) {
    throw FormatError(source, base + 4, "rank " + std::to_string(rank) + " exceeds 4");
  }
  Shape shape(rank);
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape[i] = get_le<std::uint64_t>(is, source, base + 8 + 8 * i, "dim");
    count *= shape[i];
  }
  if (count > (std::uint64_t{1} << 34)) {
    throw FormatError(source, base + 8, "implausible element count " + std::to_string(count));
  }
  std::vector<double> data(count);
  const std::uint64_t payload = base + 8 + 8 * rank;
  for (std::uint64_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<double>(get_le<std::uint64_t>(is, source, payload + 8 * i, "payload"));
  }
  return DenseArray(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const DenseArray& a) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_tensor(os, a);
}

DenseArray load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(path.string(), 0, "cannot open file");
  return read_tensor(is, path.string());
}

void write_tensor_text(std::ostream& os, const DenseArray& a) {
  os << "ISOT-TEXT 1\n" << a.rank();
  for (std::size_t d : a.shape()) os << ' ' << d;
  os << '\n';
  char buf[32];
  for (double v : a.data()) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf << '\n';
  }
}

DenseArray read_tensor_text(std::istream& is, const std::string& source) {
  std::string line;
  std::uint64_t offset = 0;
  auto next_line = [&](const char* what) {
    if (!std::getline(is, line)) throw FormatError(source, offset, std::string("missing ") + what);
    const std::uint64_t at = offset;
    offset += line.size() + 1;
    return at;
  };
  std::uint64_t at = next_line("header");
  if (line != "ISOT-TEXT 1") throw FormatError(source, at, "bad text header");
  at = next_line("shape line");
  std::istringstream shape_line(line);
  std::size_t rank = 0;
  if (!(shape_line >> rank) || rank > kMaxRank) throw FormatError(source, at, "bad rank");
  Shape shape(rank);
  for (auto& d : shape) {
    if (!(shape_line >> d)) throw FormatError(source, at, "bad dims");
  }
  std::vector<double> data(shape_product(shape));
  for (double& v : data) {
    at = next_line("value");
    const char* first = line.data();
    const char* last = first + line.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw FormatError(source, at, "bad value '" + line + "'");
  }
  return DenseArray(std::move(shape), std::move(data));
}

void save_tensor_text(const std::filesystem::path& path, const DenseArray& a) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_tensor_text(os, a);
}

DenseArray load_tensor_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError(path.string(), 0, "cannot open file");
  return read_tensor_text(is, path.string());
}

}  // namespace isomer
