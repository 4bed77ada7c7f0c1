#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tcqa {

/// Runs one command line (without the program name). Returns the exit status:
/// 0 on success, 2 on usage errors, 1 on any other failure.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace tcqa
