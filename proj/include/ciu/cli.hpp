#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "ciu/core.hpp"

namespace ciu::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kScenario = 2,
  kModel = 3,
  kInternal = 4,
};

// Parses "0.3,0.6", "x1=0.3,x2=0.6" or a mix. Positional values fill
// features in order; named values override them.
Context parse_context(const FeatureSpace& space, const std::string& text);

std::vector<std::string> split_list(const std::string& text);

// Entry point shared by the ciu binary and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ciu::cli
