#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace consortium::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;   // bad flags, config or data files
inline constexpr int kExitRuntime = 3;  // backend failures, aborted sampling, I/O

/// Runs one command line (without the program name), e.g. {"score", "--manifest", "m.json"}.
/// Human-readable output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace consortium::cli
