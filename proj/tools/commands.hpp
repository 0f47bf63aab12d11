#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qkdring::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

inline constexpr const char* kOutDirEnv = "QKDRING_OUT_DIR";

/// Runs one command line (args[0] is the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qkdring::cli
