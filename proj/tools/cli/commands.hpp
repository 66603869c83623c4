#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace deepfuse::cli {

// Stable process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Parses and runs one `deepfuse <command> ...` invocation; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace deepfuse::cli
