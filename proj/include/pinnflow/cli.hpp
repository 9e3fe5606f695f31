#pragma once

#include <iosfwd>

namespace pinnflow {

inline constexpr const char* kVersion = "0.1.0";

/// Entry point of the `pinnflow` tool. Returns the process exit code
/// (0 ok, 2 usage, 3 data, 4 numeric).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pinnflow
