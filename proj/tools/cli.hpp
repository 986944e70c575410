#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rhyme/params.hpp"

namespace rhyme::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

/// Test-only injection points; empty in the shipped binary.
struct Hooks {
  std::function<void(ParameterStore &)> corrupt_gradients;
};

/// Runs one command line (args excludes the program name) and returns the
/// process exit code.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err, const Hooks &hooks = {});

} // namespace rhyme::cli
