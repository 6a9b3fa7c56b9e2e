#include "flowmap/cli.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace flowmap;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path make_temp_dir() {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("flowmap-test-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const json& config) {
  const fs::path path = dir / "config.json";
  std::ofstream out(path);
  out << config.dump(2);
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommandResult {
  int code;
  std::string out;
  std::string err;
};

CommandResult run_cmd(const fs::path& config) {
  std::ostringstream out, err;
  const int code = cli::cmd_run(config.string(), out, err);
  return {code, out.str(), err.str()};
}

CommandResult verify_cmd(const fs::path& config) {
  std::ostringstream out, err;
  const int code = cli::cmd_verify(config.string(), out, err);
  return {code, out.str(), err.str()};
}

json scenario_config(const std::string& name, const fs::path& out_dir, int steps) {
  return json{{"scenario", name},
              {"params", {{"steps", steps}}},
              {"output_dir", out_dir.string()},
              {"tolerance", 1e-6}};
}

json explicit_harmonic_config(const fs::path& out_dir) {
  return json{
      {"problem",
       {{"n", 1},
        {"eps1", 1},
        {"eps2", -1},
        {"eps3", 1},
        {"eps4", -1},
        {"H", {{1.0, 0.0}, {0.0, 1.0}}},
        {"C", {{4.0, 0.0}, {0.0, 4.0}}},
        {"xi0", {1.0, 0.0}},
        {"grid", {{"tau_start", 0.0}, {"tau_end", 5.0}, {"steps", 1000}}}}},
      {"output_dir", out_dir.string()},
      {"tolerance", 1e-6}};
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string current;
  for (char ch : line) {
    if (ch == sep) {
      fields.push_back(current);
      current.clear();
    } else {
      current += ch;
    }
  }
  fields.push_back(current);
  return fields;
}

}  // namespace

TEST_CASE("cmd_list prints the registry") {
  std::ostringstream out;
  CHECK(cli::cmd_list(out) == cli::kExitPass);
  const std::string text = out.str();
  for (const char* name : {"harmonic-pair", "hyperbolic-pair", "cubic-coefficient"})
    CHECK(text.find(name) != std::string::npos);
}

TEST_CASE("identity pair run writes the contracted files and passes") {
  const fs::path dir = make_temp_dir();
  const fs::path config = write_config(dir, scenario_config("identity-pair", dir / "out", 500));
  const CommandResult r = run_cmd(config);
  CHECK(r.code == cli::kExitPass);

  for (const char* file : {"xi.csv", "eta.csv", "T.csv", "report.json"})
    CHECK(fs::exists(dir / "out" / file));

  const std::string xi = slurp(dir / "out" / "xi.csv");
  CHECK(xi.rfind("tau,t,comp_1,comp_2\n", 0) == 0);

  const std::string t_csv = slurp(dir / "out" / "T.csv");
  std::istringstream lines(t_csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "tau,t_11,t_12,t_21,t_22");
  int rows = 0;
  double worst = 0.0;
  while (std::getline(lines, line)) {
    const auto fields = split(line, ',');
    REQUIRE(fields.size() == 5);
    worst = std::max(worst, std::abs(std::stod(fields[1]) - 1.0));
    worst = std::max(worst, std::abs(std::stod(fields[2])));
    worst = std::max(worst, std::abs(std::stod(fields[3])));
    worst = std::max(worst, std::abs(std::stod(fields[4]) - 1.0));
    ++rows;
  }
  CHECK(rows == 501);
  CHECK(worst <= 1e-9);

  const json report = json::parse(slurp(dir / "out" / "report.json"));
  CHECK(report.at("pass").get<bool>());
}

TEST_CASE("csv output is deterministic and round-trips losslessly") {
  const fs::path dir = make_temp_dir();
  const fs::path a = dir / "a", b = dir / "b";
  const fs::path config_a = dir / "ca.json", config_b = dir / "cb.json";
  {
    std::ofstream(config_a) << scenario_config("harmonic-pair", a, 2000).dump();
    std::ofstream(config_b) << scenario_config("harmonic-pair", b, 2000).dump();
  }
  CHECK(run_cmd(config_a).code == cli::kExitPass);
  CHECK(run_cmd(config_b).code == cli::kExitPass);
  for (const char* file : {"xi.csv", "eta.csv", "T.csv"})
    CHECK(slurp(a / file) == slurp(b / file));

  // every field parses as a finite double whose shortest form is the field
  const std::string csv = slurp(a / "eta.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);  // header
  int checked = 0;
  while (std::getline(lines, line)) {
    for (const std::string& field : split(line, ',')) {
      const double value = std::stod(field);
      CHECK(std::isfinite(value));
      CHECK(format_double(value) == field);
      ++checked;
    }
  }
  CHECK(checked > 2000 * 4);
}

TEST_CASE("explicit problem block config runs") {
  const fs::path dir = make_temp_dir();
  const fs::path config = write_config(dir, explicit_harmonic_config(dir / "out"));
  CHECK(run_cmd(config).code == cli::kExitPass);
}

TEST_CASE("formula coefficients are accepted") {
  const fs::path dir = make_temp_dir();
  json cfg = explicit_harmonic_config(dir / "out");
  cfg["problem"].erase("H");
  cfg["problem"]["H_formula"] = "cubic";
  cfg["problem"]["eps1"] = -1;
  cfg["problem"]["eps2"] = 1;
  cfg["problem"]["xi0"] = {2.0, 0.0};
  cfg["problem"]["C"] = {{1.0, 0.0}, {0.0, 1.0}};
  const fs::path config = write_config(dir, cfg);
  CHECK(run_cmd(config).code == cli::kExitPass);
}

TEST_CASE("config validation failures exit with code 2") {
  const fs::path dir = make_temp_dir();
  SUBCASE("eps out of range names the field") {
    json cfg = explicit_harmonic_config(dir / "out");
    cfg["problem"]["eps1"] = 2;
    const CommandResult r = run_cmd(write_config(dir, cfg));
    CHECK(r.code == cli::kExitConfigError);
    CHECK(r.err.find("eps1") != std::string::npos);
  }
  SUBCASE("scenario and problem are mutually exclusive") {
    json cfg = explicit_harmonic_config(dir / "out");
    cfg["scenario"] = "identity-pair";
    CHECK(run_cmd(write_config(dir, cfg)).code == cli::kExitConfigError);
  }
  SUBCASE("neither scenario nor problem") {
    CHECK(run_cmd(write_config(dir, json{{"tolerance", 1e-6}})).code ==
          cli::kExitConfigError);
  }
  SUBCASE("unknown scenario") {
    CHECK(run_cmd(write_config(dir, json{{"scenario", "nope"}})).code ==
          cli::kExitConfigError);
  }
  SUBCASE("unknown scenario parameter") {
    json cfg = scenario_config("identity-pair", dir / "out", 100);
    cfg["params"]["phase"] = 1.0;
    const CommandResult r = run_cmd(write_config(dir, cfg));
    CHECK(r.code == cli::kExitConfigError);
    CHECK(r.err.find("phase") != std::string::npos);
  }
  SUBCASE("malformed JSON") {
    const fs::path path = dir / "broken.json";
    std::ofstream(path) << "{ not json";
    CHECK(run_cmd(path).code == cli::kExitConfigError);
  }
  SUBCASE("missing config file") {
    CHECK(run_cmd(dir / "does-not-exist.json").code == cli::kExitConfigError);
  }
  SUBCASE("bad grid") {
    json cfg = explicit_harmonic_config(dir / "out");
    cfg["problem"]["grid"]["steps"] = 0;
    const CommandResult r = run_cmd(write_config(dir, cfg));
    CHECK(r.code == cli::kExitConfigError);
  }
}

TEST_CASE("corrupted glue run fails verification but still writes a report") {
  const fs::path dir = make_temp_dir();
  const fs::path config =
      write_config(dir, scenario_config("corrupted-glue", dir / "out", 500));
  const CommandResult r = run_cmd(config);
  CHECK(r.code == cli::kExitVerifyFail);
  const json report = json::parse(slurp(dir / "out" / "report.json"));
  CHECK_FALSE(report.at("pass").get<bool>());
  CHECK(report.at("transport_error_max").get<double>() > 1e-2);
}

TEST_CASE("divergent problems exit with code 3") {
  const fs::path dir = make_temp_dir();
  json cfg = explicit_harmonic_config(dir / "out");
  cfg["problem"]["eps2"] = 1;  // hyperbolic
  cfg["problem"]["H"] = {{3.0, 0.0}, {0.0, 3.0}};
  cfg["problem"]["C"] = {{3.0, 0.0}, {0.0, 3.0}};
  cfg["problem"]["eps4"] = 1;
  cfg["problem"]["xi0"] = {1.0, 1.0};
  cfg["problem"]["grid"]["tau_end"] = 12.0;
  const CommandResult r = run_cmd(write_config(dir, cfg));
  CHECK(r.code == cli::kExitDivergence);
  CHECK(r.err.find("diverg") != std::string::npos);
}

TEST_CASE("FLOWMAP_OUT overrides the configured output directory") {
  const fs::path dir = make_temp_dir();
  const fs::path env_dir = dir / "env-out";
  const fs::path config =
      write_config(dir, scenario_config("identity-pair", dir / "ignored", 200));
  ::setenv("FLOWMAP_OUT", env_dir.c_str(), 1);
  const CommandResult r = run_cmd(config);
  ::unsetenv("FLOWMAP_OUT");
  CHECK(r.code == cli::kExitPass);
  CHECK(fs::exists(env_dir / "T.csv"));
  CHECK_FALSE(fs::exists(dir / "ignored" / "T.csv"));
}

TEST_CASE("sphere chart run writes geometry outputs") {
  const fs::path dir = make_temp_dir();
  const json cfg{{"scenario", "sphere-chart"}, {"output_dir", (dir / "out").string()}};
  const CommandResult r = run_cmd(write_config(dir, cfg));
  CHECK(r.code == cli::kExitPass);
  CHECK(fs::exists(dir / "out" / "geometry.csv"));
  const json report = json::parse(slurp(dir / "out" / "report.json"));
  CHECK(report.at("arc_length").get<double>() ==
        doctest::Approx(2.0 * std::acos(-1.0)).epsilon(1e-6));
}

TEST_CASE("cmd_verify checks the convergence order") {
  const fs::path dir = make_temp_dir();
  SUBCASE("harmonic pair passes with order about 4") {
    const fs::path config =
        write_config(dir, scenario_config("harmonic-pair", dir / "out", 800));
    const CommandResult r = verify_cmd(config);
    CHECK(r.code == cli::kExitPass);
    CHECK(r.out.find("order") != std::string::npos);
    CHECK(r.out.find("PASS") != std::string::npos);
  }
  SUBCASE("corrupted glue fails") {
    const fs::path config =
        write_config(dir, scenario_config("corrupted-glue", dir / "out", 500));
    CHECK(verify_cmd(config).code == cli::kExitVerifyFail);
  }
  SUBCASE("geometry scenarios cannot be verified") {
    const json cfg{{"scenario", "sphere-chart"}};
    CHECK(verify_cmd(write_config(dir, cfg)).code == cli::kExitConfigError);
  }
  SUBCASE("missing config file") {
    CHECK(verify_cmd(dir / "missing.json").code == cli::kExitConfigError);
  }
}
