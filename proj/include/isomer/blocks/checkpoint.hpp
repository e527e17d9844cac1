#pragma once

#include <filesystem>
#include <iosfwd>

#include "isomer/blocks/params.hpp"

// Parameter checkpoint (little-endian):
//
//   offset  size  field
//   0       4     magic "ISOC"
//   4       4     u32 format version (1)
//   8       8     u64 manifest length L
//   16      L     manifest, UTF-8 JSON:
//                   {"tensors": [{"name": s, "shape": [..], "offset": o, "bytes": n}, ...]}
//   16+L    ...   concatenated ISOT tensor records; `offset` is relative to
//                 the first record, `bytes` is the full record size
//
// Tensors appear in name order, so equal parameter sets give identical files.

namespace isomer::blocks {

inline constexpr char kCheckpointMagic[4] = {'I', 'S', 'O', 'C'};

void write_checkpoint(std::ostream& os, const ParamSet& params);
ParamSet read_checkpoint(std::istream& is, const std::string& source = "<stream>");
void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_checkpoint(const std::filesystem::path& path);

}  // namespace isomer::blocks
