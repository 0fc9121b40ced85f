#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gridmargin {

// Command-line front end. Returns the process exit status: 0 on success,
// 1 on a study error (non-convergent base case, degenerate fold, ...),
// 2 on an input error (unreadable case, malformed flags, unknown bus).
// Reports go to `out` unless --output is given; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gridmargin
