#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace efcn::cli {

// Runs one subcommand. Errors are reported on `err` as a single JSON line
// and mapped to a nonzero exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace efcn::cli
