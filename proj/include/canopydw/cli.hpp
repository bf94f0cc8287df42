#pragma once

// Command-line front end. Exit codes: 0 success, 1 data or validation
// error, 2 usage error. Results go to `out`, diagnostics to `err`.

#include <iosfwd>
#include <string>
#include <vector>

namespace canopydw {

/// `args` excludes the program name.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace canopydw
