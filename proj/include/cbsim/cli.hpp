// Command-line front end: parses a subcommand plus shared flags, runs the
// requested engine deterministically, and writes one JSON report per run.
// Exposed as a function so tests can drive it in-process.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cbsim {

// argv-style invocation without the program name.  Returns the process exit
// status: 0 success, 2 validation error, 3 engine error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cbsim
