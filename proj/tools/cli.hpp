#pragma once

#include <ostream>

namespace qmmm::cli {

enum ExitCode : int {
  kOk = 0,
  kValidationFailed = 1,
  kUsage = 2,
  kNoSolution = 3,
  kMaxIter = 4,
  kTooFewSamples = 5,
  kCheckFailed = 6,
};

/// Runs the command line; stdout carries the report, stderr diagnostics.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qmmm::cli
