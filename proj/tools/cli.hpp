#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"

namespace cpe::cli {

enum ExitCode : int {
  kSuccess = 0,
  kPreconditionFailure = 1,
  kAssertionFailure = 2,
};

/// Runs one command. Data goes to files in the output directory (and, for
/// eig and lambda-fit, to `out`); diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 17 significant digits, '.' decimal separator.
std::string num(double v);

/// "# config_sha256=<hex> seed=<n>"
std::string header_line(const RunConfig& cfg);

/// Reads the shc CSV format back into a curve. The volume comes from the
/// "# volume=" header line.
ShcCurve read_shc_csv(const std::string& path);

}  // namespace cpe::cli
