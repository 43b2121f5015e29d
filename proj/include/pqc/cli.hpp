#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pqc/config.hpp"

namespace pqc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// One sweep axis: a config key and the values to try, duplicates removed.
struct GridAxis {
    std::string key;
    std::vector<std::string> values;
};

/// Parses `key=v1,v2,...` specs; repeated keys merge into one axis and values
/// that canonicalise to the same setting are kept once.
std::vector<GridAxis> parse_grid(const std::vector<std::string>& specs);

/// Cartesian product of the axes, first axis varying slowest.
std::vector<std::vector<Override>> expand_grid(const std::vector<GridAxis>& axes);

/// Entry point behind the `pqc` binary. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pqc::cli
