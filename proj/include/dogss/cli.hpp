#pragma once

#include "dogss/error.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace dogss::cli {

// Stable process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDegenerate = 4;

int exit_code(ErrorKind kind);

// Runs one command line (args[0] is the program name). Errors are reported as
// a single JSON line on `err`; the return value is the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dogss::cli
