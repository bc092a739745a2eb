#pragma once

#include <iosfwd>

namespace pct::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kParse = 4,
  kConfig = 5,
  kConstraint = 6,
  kNumeric = 7,
};

// Runs one command line. Diagnostics go to `err` as a single
// "error: <kind>: <message>" line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pct::cli
