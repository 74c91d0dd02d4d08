#pragma once

// Command-line front end. `run_cli` is the whole program minus process
// plumbing, so tests can drive it in-process.
//
//   mixot distance A.json B.json [--p 2] [--no-timing]
//   mixot barycenter A.json B.json [--t 0,0.25,0.5,0.75,1] [--out dir]
//                    [--rasterize] [--sinkhorn] [--grid n[,n]] [--bounds auto|lo,hi[,lo,hi]]
//   mixot barycenter A.json B.json C.json --weights 0.2,0.3,0.5 [--out dir] ...
//   mixot compare A.json B.json [--eps-rel 1e-4] [--grid ..] [--bounds ..] [--no-assert]
//   mixot validate [--suite all|metric|...] [--seed 1]

#include <iosfwd>
#include <string>
#include <vector>

namespace mixot {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidationFailed = 1,
  kExitSchema = 2,
  kExitIncompatible = 3,
  kExitConvergence = 4,
  kExitOracleViolation = 5,
};

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mixot
