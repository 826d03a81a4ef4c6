#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gravcollapse/scenarios.hpp"

namespace gravcollapse {

// One axis of a parameter sweep: a dotted key such as "model.epsilon" and
// the values it takes. Sweeps are the Cartesian product of their axes.
struct SweepAxis {
  std::string key;
  std::vector<double> values;
  bool operator==(const SweepAxis&) const = default;
};

struct RunConfig {
  ScenarioSpec spec;
  std::filesystem::path output_dir = "gravcollapse_out";
  std::vector<std::string> formats{"json", "csv"};
  std::vector<SweepAxis> sweep;
  bool operator==(const RunConfig&) const = default;
};

// Parses YAML text. Every key is checked against the schema; omitted keys
// take the scenario's defaults. Throws ConfigError with the line number of
// the offending node, or naming the violated invariant.
RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);

// Fully materialized YAML; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);

// Configurations for each point of the sweep grid, in row-major order of
// the sweep axes. Without a sweep, the config itself.
std::vector<std::pair<std::string, RunConfig>> expand_sweep(const RunConfig& config);

}  // namespace gravcollapse
