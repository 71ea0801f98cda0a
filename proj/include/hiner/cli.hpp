#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hiner {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

// Runs `hiner <subcommand> ...`; args[0] is the program name. Reports go to
// `out` unless redirected with --out/--report; failures print one JSON
// error record to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hiner
