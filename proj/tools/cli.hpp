#pragma once

#include <string>
#include <vector>

namespace semsplat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitInvariant = 3;

/// Entry point of the `semsplat` tool; returns the process exit code.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace semsplat::cli
