#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace wendy::cli {

/// Runs the command line tool. args excludes the program name.
/// Returns 0 on success, 2 on validation errors, 1 on runtime errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wendy::cli
