#include "gravcollapse/report.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include "gravcollapse/errors.hpp"
#include "json.hpp"

namespace gravcollapse {

namespace fs = std::filesystem;

std::string sha256_hex_of(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("sha256: cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex_of(ss.str());
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string to_csv(const Series& series, const std::string& scenario) {
  std::string out = "# gravcollapse-csv v" + std::to_string(kCsvSchemaVersion) + " scenario=" + scenario + "\n";
  for (std::size_t i = 0; i < series.columns.size(); ++i) out += (i ? "," : "") + series.columns[i];
  out += "\n";
  for (const auto& row : series.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_double(row[i]);
    out += "\n";
  }
  return out;
}

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw ConfigError("failed writing '" + p.string() + "'");
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output directory '" + dir.string() + "' is not writable");
}

void finish(const fs::path& dir, const RunConfig& config, double wall_seconds, std::vector<fs::path>& files,
            const std::string& status) {
  write_text(dir / "config.yaml", emit_config(config));
  files.push_back(dir / "config.yaml");
  nlohmann::json meta{
      {"timestamp", utc_timestamp()},
      {"version", kVersion},
      {"seed", config.spec.model.seed},
      {"ensemble_base_seed", config.spec.ensemble.base_seed},
      {"scenario", to_string(config.spec.kind)},
      {"status", status},
      {"wall_time_seconds", wall_seconds},
      {"config", emit_config(config)},
  };
  write_text(dir / "metadata.json", meta.dump(2) + "\n");
  files.push_back(dir / "metadata.json");

  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& f : files)
    manifest.push_back({{"file", f.filename().string()}, {"bytes", fs::file_size(f)}, {"sha256", sha256_hex(f)}});
  write_text(dir / "manifest.json", nlohmann::json{{"files", manifest}}.dump(2) + "\n");
  files.push_back(dir / "manifest.json");
}

}  // namespace

std::vector<fs::path> write_outputs(const fs::path& dir, const ScenarioReport& report, const RunConfig& config,
                                    double wall_seconds) {
  prepare_dir(dir);
  std::vector<fs::path> files;
  auto wants = [&](const char* f) {
    for (const auto& x : config.formats)
      if (x == f) return true;
    return false;
  };
  if (wants("json")) {
    nlohmann::json doc{{"scenario", report.scenario}, {"version", kVersion}, {"summary", report.summary}};
    write_text(dir / "report.json", doc.dump(2) + "\n");
    files.push_back(dir / "report.json");
  }
  if (wants("csv")) {
    write_text(dir / "series.csv", to_csv(report.series, report.scenario));
    files.push_back(dir / "series.csv");
  }
  finish(dir, config, wall_seconds, files, "ok");
  return files;
}

void write_failure(const fs::path& dir, const RunConfig& config, const std::string& category,
                   const std::string& message, const std::string& diagnostic_json, double wall_seconds) {
  prepare_dir(dir);
  std::vector<fs::path> files;
  nlohmann::json diag = nlohmann::json::parse(diagnostic_json.empty() ? "{}" : diagnostic_json, nullptr, false);
  if (diag.is_discarded()) diag = diagnostic_json;
  nlohmann::json doc{{"category", category}, {"message", message}, {"diagnostic", diag}};
  write_text(dir / "error.json", doc.dump(2) + "\n");
  files.push_back(dir / "error.json");
  finish(dir, config, wall_seconds, files, category);
}

}  // namespace gravcollapse
