#pragma once

#include <string>
#include <vector>

namespace semattn::cli {

// Exit codes: 0 ok, 1 runtime or validation failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the `semattn` tool; args exclude the program name.
int run(const std::vector<std::string>& args);

}  // namespace semattn::cli
