#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "gravcollapse/config.hpp"
#include "gravcollapse/core.hpp"
#include "gravcollapse/errors.hpp"
#include "gravcollapse/execute.hpp"
#include "gravcollapse/report.hpp"
#include "json.hpp"

using namespace gravcollapse;

namespace {

int config_failure(const std::exception& e) {
  std::cerr << nlohmann::json{{"category", "config_error"}, {"message", e.what()}}.dump() << "\n";
  return kExitConfig;
}

int estimate(std::optional<double> mass, std::optional<double> size, double epsilon, std::optional<double> density) {
  const auto units = UnitSystem::si();
  if (!size) throw DomainError("estimate: --size is required");
  if (!mass && !density) throw DomainError("estimate: give --mass or --density");
  const double m = mass ? *mass : *density * *size * *size * *size;
  nlohmann::json out{
      {"units", "SI"},
      {"mass_kg", m},
      {"size_m", *size},
      {"epsilon", epsilon},
      {"self_grav_energy_J", self_grav_energy(m, *size, units)},
      {"coulomb_gravity_ratio", coulomb_gravity_ratio(units)},
  };
  const double tau = collapse_time_estimate(epsilon, m, *size, units);
  out["collapse_time_s"] = std::isfinite(tau) ? nlohmann::json(tau) : nlohmann::json("inf");
  if (density && epsilon > 0.0) {
    const std::vector<double> sizes{*size / 10.0, *size, *size * 10.0};
    const auto check = fifth_power_scaling_check(*density, sizes, epsilon, units);
    out["density_kg_m3"] = *density;
    out["constant_density_log_slope"] = check.log_slope;
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bohmian-sourced gravitational collapse simulator"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the scenario described by a config file");
  run->add_option("config", config_path, "YAML config")->required();
  auto* sweep = app.add_subcommand("sweep", "Run every point of the config's sweep grid");
  sweep->add_option("config", config_path, "YAML config")->required();
  auto* validate = app.add_subcommand("validate", "Parse and validate a config, print it fully resolved");
  validate->add_option("config", config_path, "YAML config")->required();

  std::optional<double> mass, size, density;
  double epsilon = 1e-3;
  auto* est = app.add_subcommand("estimate", "Closed-form collapse-time and ratio estimates (SI units)");
  est->add_option("--mass", mass, "mass in kg");
  est->add_option("--size", size, "size in m");
  est->add_option("--epsilon", epsilon, "imaginary part of the coupling")->capture_default_str();
  est->add_option("--density", density, "mass density in kg/m^3");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*est) return estimate(mass, size, epsilon, density);
    const auto config = parse_config_file(config_path);
    if (*validate) {
      std::cout << emit_config(config);
      return kExitOk;
    }
    if (*sweep) return execute_sweep(config, std::cerr);
    return execute(config, std::cerr);
  } catch (const ConfigError& e) {
    return config_failure(e);
  } catch (const std::logic_error& e) {
    return config_failure(e);
  }
}
