#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fsr::cli {

// Runs one `fsr` command line (args excludes the program name). Returns 0 on
// success, 1 on a domain or I/O error and 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fsr::cli
