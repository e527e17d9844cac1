#pragma once

#include <iosfwd>

// The `isomer` command-line tool:
//
//   isomer [--config FILE] [--seed S] [--out-dir DIR] [--threads T] <command> ...
//
//   verify  --suite NAME        run verification suites
//   bench   --blocks --tokens   time block forwards (median / IQR)
//   cost    --tokens --channels analytic FLOP tables
//   train   --steps             train the toy pipeline
//   eval    --checkpoint PATH   per-frame IoU of a checkpoint
//   dump    --what KIND         export weight maps, heatmaps, attention
//
// The config file is JSON with optional sections "model", "bench", "cost",
// "verify", "eval" and "dump"; a manifest.json from an earlier run is also
// accepted and replays its resolved configuration. Flags override the file.

namespace isomer::cli {

/// Exit status: 0 success, 1 failed checks or runtime error, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace isomer::cli
