#pragma once

#include "sdlab/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace sdlab::cli {

std::vector<std::string> subcommand_names();

/// Schema defaults for one subcommand; throws InvalidInput for an unknown name.
RunConfig default_config(const std::string& subcommand);

/// Full command-line entry point. Returns the process exit code:
/// 0 success, 1 invalid input, 2 I/O failure, 3 solver failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sdlab::cli
