#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gravcollapse/config.hpp"
#include "gravcollapse/scenarios.hpp"

namespace gravcollapse {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kCsvSchemaVersion = 1;

std::string sha256_hex(const std::filesystem::path& file);
std::string sha256_hex_of(const std::string& bytes);

// CSV text: a "# gravcollapse-csv v<schema> scenario=<name>" comment, the
// column line, then rows in shortest round-trip decimal form.
std::string to_csv(const Series& series, const std::string& scenario);

std::string format_double(double x);

// Writes report.json / series.csv (as requested by the formats), the
// resolved config, metadata.json and manifest.json into dir. Returns the
// files written, manifest last.
std::vector<std::filesystem::path> write_outputs(const std::filesystem::path& dir, const ScenarioReport& report,
                                                 const RunConfig& config, double wall_seconds);

// Writes error.json (category and diagnostic payload) plus metadata and
// manifest for a failed run.
void write_failure(const std::filesystem::path& dir, const RunConfig& config, const std::string& category,
                   const std::string& message, const std::string& diagnostic_json, double wall_seconds);

}  // namespace gravcollapse
