#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace augagent {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitBackendOrConfigError = 2;

// Parses argv (program name first) and runs one subcommand:
// train-scorer, refine-prompt, detect, augment, assemble, report.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace augagent
