#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "mia/config.hpp"

namespace mia::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

// Parses and runs one command line. Never throws; failures map to exit
// codes 2 (usage or validation) and 3 (data, I/O, network).
int run(const std::vector<std::string>& args, const EnvLookup& env, std::ostream& out,
        std::ostream& err);

}  // namespace mia::cli
