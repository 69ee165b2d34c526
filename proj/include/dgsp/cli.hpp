#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace dgsp::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kDataError = 2,
  kRunFailure = 3,
};

// Runs one subcommand (convert, prepare, train, eval, baseline, detect,
// report). `args` excludes the program name. Failures print a single JSON
// line {"error": <category>, "message": ...} on `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                std::ostream& err = std::cerr);

}  // namespace dgsp::cli
