#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pfr {

/// Runs the command-line tool on `args` (without the program name). Failures
/// are reported on `err` as "error[<category>]: <message>" with a nonzero
/// return value: 1 for runtime errors, 2 for usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pfr
