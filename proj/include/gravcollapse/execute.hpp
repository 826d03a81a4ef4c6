#pragma once

#include <iosfwd>
#include <string>

#include "gravcollapse/config.hpp"

namespace gravcollapse {

enum ExitStatus : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitIntegration = 2,
};

// Runs the configured scenario and writes its outputs. Errors are reported
// as one JSON line on `err` and mapped to an exit status.
int execute(const RunConfig& config, std::ostream& err);

// Runs every point of the config's sweep into <output_dir>/<point>/.
int execute_sweep(const RunConfig& config, std::ostream& err);

}  // namespace gravcollapse
