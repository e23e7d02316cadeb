#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "darkfarseer/training.hpp"

namespace darkfarseer::cli {

/// Runs the command line in-process. Returns the exit code; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// "3:1", "25%" or "0.25" (virtual share) to an observed:virtual ratio.
training::Ratio parse_ratio(const std::string& text);

}  // namespace darkfarseer::cli
