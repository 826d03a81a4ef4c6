#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "gravcollapse/report.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status = -1;
  std::string out;
};

// Runs the CLI with stderr folded into the captured output.
Outcome cli(const std::string& args) {
  const std::string cmd = std::string(GRAVCOLLAPSE_CLI) + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) o.out.append(buf.data(), n);
  const int raw = pclose(pipe);
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("gravcollapse_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  fs::path config(const std::string& body, const std::string& out = "out") const {
    const auto p = dir / "config.yaml";
    std::ofstream(p) << body << "output:\n  directory: " << (dir / out).string() << "\n";
    return p;
  }
};

}  // namespace

TEST_CASE("run writes the report and a matching manifest") {
  Scratch s("run");
  const auto r = cli("run " + s.config("scenario: eigenstate_drift\n").string());
  CHECK(r.status == 0);
  const auto out = s.dir / "out";
  for (const char* f : {"report.json", "series.csv", "config.yaml", "metadata.json", "manifest.json"})
    CHECK(fs::exists(out / f));
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(report.at("scenario") == "eigenstate_drift");
  CHECK(report.at("summary").at("within_threshold").get<bool>());

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  REQUIRE(manifest.at("files").size() == 4);
  for (const auto& entry : manifest.at("files")) {
    const auto f = out / entry.at("file").get<std::string>();
    CHECK(entry.at("sha256").get<std::string>() == gravcollapse::sha256_hex(f));
    CHECK(entry.at("bytes").get<std::uintmax_t>() == fs::file_size(f));
  }
  // the written config is the fully resolved one and runs again unchanged
  CHECK(cli("validate " + (out / "config.yaml").string()).status == 0);

  const auto csv = slurp(out / "series.csv");
  CHECK(csv.rfind("# gravcollapse-csv v1 scenario=eigenstate_drift\n", 0) == 0);
}

TEST_CASE("reruns are byte identical") {
  Scratch s("repeat");
  const std::string body = "scenario: pointer_cat\nensemble:\n  n_runs: 6\n";
  REQUIRE(cli("run " + s.config(body, "a").string()).status == 0);
  REQUIRE(cli("run " + s.config(body, "b").string()).status == 0);
  CHECK(slurp(s.dir / "a" / "report.json") == slurp(s.dir / "b" / "report.json"));
  CHECK(slurp(s.dir / "a" / "series.csv") == slurp(s.dir / "b" / "series.csv"));
}

TEST_CASE("zero duration is a valid run") {
  Scratch s("zero");
  const auto r = cli("run " + s.config("scenario: eigenstate_drift\nmodel:\n  t_max: 0\n").string());
  CHECK(r.status == 0);
  CHECK(fs::exists(s.dir / "out" / "report.json"));
}

TEST_CASE("overflowing step exits 2 with a diagnostic") {
  Scratch s("unstable");
  const auto r = cli("run " + s.config(R"(scenario: eigenstate_drift
model:
  epsilon: 1
  grav_strength: 1000000
  dt: 1
  t_max: 4
  flow: unnormalized
)").string());
  CHECK(r.status == 2);
  const auto line = nlohmann::json::parse(r.out.substr(0, r.out.find('\n')));
  CHECK(line.at("category") == "integration_failure");
  CHECK(line.at("diagnostic").at("non_finite_amplitudes").get<int>() > 0);
  const auto err = nlohmann::json::parse(slurp(s.dir / "out" / "error.json"));
  CHECK(err.at("category") == "integration_failure");
  CHECK(fs::exists(s.dir / "out" / "manifest.json"));
  CHECK_FALSE(fs::exists(s.dir / "out" / "report.json"));
}

TEST_CASE("config errors exit 1") {
  Scratch s("bad");
  const auto r = cli("run " + s.config("scenario: pointer_cat\nmodel:\n  epsilonn: 0.1\n").string());
  CHECK(r.status == 1);
  CHECK(r.out.find("epsilonn") != std::string::npos);
  CHECK(r.out.find("line 3") != std::string::npos);
  CHECK(cli("run " + (s.dir / "missing.yaml").string()).status == 1);
  CHECK(cli("frobnicate").status == 1);
}

TEST_CASE("validate prints the resolved config") {
  Scratch s("validate");
  const auto r = cli("validate " + s.config("scenario: hydrogen_analog\n").string());
  CHECK(r.status == 0);
  CHECK(r.out.find("relax_steps: 20000") != std::string::npos);
}

TEST_CASE("sweep writes one directory per point") {
  Scratch s("sweep");
  const auto r = cli("sweep " + s.config("scenario: two_branch_oracle\nsweep:\n  two_branch_oracle.p: [0.2, 0.5, 0.8]\n").string());
  CHECK(r.status == 0);
  for (const char* p : {"point_000", "point_001", "point_002"}) CHECK(fs::exists(s.dir / "out" / p / "report.json"));
}

TEST_CASE("estimate") {
  const auto r = cli("estimate --mass 1e-17 --size 1e-8 --epsilon 1e-3");
  REQUIRE(r.status == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("collapse_time_s").get<double>() > 0.0);
  CHECK(j.at("coulomb_gravity_ratio").get<double>() > 1e39);
  CHECK(cli("estimate --mass 1").status == 1);
  CHECK(nlohmann::json::parse(cli("estimate --mass 1 --size 1 --epsilon 0").out).at("collapse_time_s") == "inf");
}
