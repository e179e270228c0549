// The `ictd` command-line tool: verify, train, demo and replay.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ictd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitUsage = 2;

/// args excludes the program name. Human-readable output goes to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ictd::cli
