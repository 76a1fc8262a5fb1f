#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace memsde::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// memsde <command> --config PATH --out DIR [--seed N] [--workers N] [--format csv|json|both]
/// `args` excludes the program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace memsde::cli
