#include "gravcollapse/execute.hpp"

#include <chrono>
#include <ostream>

#include "gravcollapse/errors.hpp"
#include "gravcollapse/report.hpp"
#include "json.hpp"

namespace gravcollapse {

namespace {

void report_error(std::ostream& err, const std::string& category, const std::string& message,
                  const std::string& diagnostic) {
  nlohmann::json line{{"category", category}, {"message", message}};
  if (!diagnostic.empty()) {
    auto d = nlohmann::json::parse(diagnostic, nullptr, false);
    line["diagnostic"] = d.is_discarded() ? nlohmann::json(diagnostic) : d;
  }
  err << line.dump() << "\n";
}

}  // namespace

int execute(const RunConfig& config, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  try {
    config.spec.validate();
    const auto report = run_scenario(config.spec);
    write_outputs(config.output_dir, report, config, elapsed());
    return kExitOk;
  } catch (const IntegrationError& e) {
    report_error(err, "integration_failure", e.what(), e.diagnostic());
    try {
      write_failure(config.output_dir, config, "integration_failure", e.what(), e.diagnostic(), elapsed());
    } catch (const std::exception&) {
    }
    return kExitIntegration;
  } catch (const std::logic_error& e) {
    report_error(err, "config_error", e.what(), "");
    return kExitConfig;
  } catch (const ConfigError& e) {
    report_error(err, "config_error", e.what(), "");
    return kExitConfig;
  }
}

int execute_sweep(const RunConfig& config, std::ostream& err) {
  int worst = kExitOk;
  for (auto& [name, point] : expand_sweep(config)) {
    if (!name.empty()) point.output_dir = config.output_dir / name;
    const int status = execute(point, err);
    worst = std::max(worst, status);
  }
  return worst;
}

}  // namespace gravcollapse
