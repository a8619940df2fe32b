#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace amdmil::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumeric = 2;

/// Entry point behind the `amdmil` binary. Returns 0 on success, 1 on a
/// configuration, usage, format or I/O error and 2 on a numeric failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace amdmil::cli
