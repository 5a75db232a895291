#pragma once

#include <iosfwd>

namespace aniso {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitConfig = 2,
    kExitSolver = 3,
    kExitTheory = 4,
};

// aniso-flow simulate|converge|k0|wulff --config <file> [--out <dir>]
//            [--threads n] [--paper-scale]
// Returns the process exit code; diagnostics go to err, progress to out.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aniso
