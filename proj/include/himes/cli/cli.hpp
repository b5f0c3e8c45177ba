#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace himes::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitTransport = 2;

/// Runs one command line (without the program name). Results go to out,
/// diagnostics and usage text to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace himes::cli
