#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "isomer/numerics/dense_array.hpp"

// Binary tensor record (all integers and floats little-endian):
//
//   offset  size      field
//   0       4         magic "ISOT"
//   4       4         u32 rank (0..4)
//   8       8*rank    u64 dims
//   8+8r    8*count   f64 payload, row-major
//
// Text variant, for hand-written fixtures:
//
//   ISOT-TEXT 1
//   <rank> <d0> <d1> ...
//   <one value per line, printed with 17 significant digits>
//
// Both formats round-trip every finite double exactly.

namespace isomer {

/// Malformed or truncated tensor data. Carries the source name and byte offset.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string source, std::uint64_t offset, const std::string& what);
  const std::string& source() const { return source_; }
  std::uint64_t offset() const { return offset_; }

 private:
  std::string source_;
  std::uint64_t offset_;
};

inline constexpr char kTensorMagic[4] = {'I', 'S', 'O', 'T'};

std::uint64_t tensor_record_size(const DenseArray& a);

void write_tensor(std::ostream& os, const DenseArray& a);
/// Reads one record starting at the stream's current position. `source`
/// names the stream in error messages.
DenseArray read_tensor(std::istream& is, const std::string& source = "<stream>");

void save_tensor(const std::filesystem::path& path, const DenseArray& a);
DenseArray load_tensor(const std::filesystem::path& path);

void write_tensor_text(std::ostream& os, const DenseArray& a);
DenseArray read_tensor_text(std::istream& is, const std::string& source = "<stream>");
void save_tensor_text(const std::filesystem::path& path, const DenseArray& a);
DenseArray load_tensor_text(const std::filesystem::path& path);

}  // namespace isomer
