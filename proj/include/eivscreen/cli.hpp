#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace eivscreen {

// Entry point of the eivscreen command-line tool. `args` excludes the program
// name. Data goes to `out` (or files), diagnostics to `err`. Returns the exit
// code: 0 on success, 1 on a library error, CLI11's code on a usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eivscreen
