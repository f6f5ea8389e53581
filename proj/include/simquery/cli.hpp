#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace simquery::cli {

/// Runs one `simquery` invocation; args excludes the program name.
/// Exit codes: 0 success, 1 usage error, 2 data/validation error,
/// 3 runtime failure.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Subcommand names, in help order.
const std::vector<std::string>& subcommands();

/// Closest subcommand by edit distance, or empty when nothing is close.
std::string suggest(const std::string& unknown);

}  // namespace simquery::cli
