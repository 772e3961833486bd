#pragma once

#include <string>
#include <vector>

namespace seng::harness {

// Full command-line driver: parses flags (and an optional key=value config
// file), runs the requested experiment and writes metrics.csv plus the final
// model under --out. Returns the process exit code; failures emit one
// machine-readable JSON line on stderr.
int run_training_cli(const std::vector<std::string>& args);

}  // namespace seng::harness
