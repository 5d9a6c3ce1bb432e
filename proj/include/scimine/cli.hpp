#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace scimine {

/// Entry point of the `scimine` command. `args` excludes the program name.
/// Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scimine
