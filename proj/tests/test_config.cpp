#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mixtwin/config.hpp"
#include "mixtwin/errors.hpp"

using namespace mixtwin;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(MIXTWIN_SOURCE_DIR) / "configs";

struct CliResult {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into the captured output.
CliResult cli(const std::string& args) {
  const std::string cmd = "MIXTWIN_LOG=quiet \"" + std::string(MIXTWIN_CLI) + "\" " + args + " 2>&1";
  CliResult r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mixtwin_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<Diagnostic> only(const std::vector<Diagnostic>& diags, Diagnostic::Severity s) {
  std::vector<Diagnostic> out;
  for (const auto& d : diags) {
    if (d.severity == s) out.push_back(d);
  }
  return out;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("default scenario roster and perturbations") {
  const auto cfg = default_scenario();
  REQUIRE(cfg.roster.size() == 8);
  CHECK(cfg.head().id == EntityId{EntityKind::PhysicalVehicle, 1});
  CHECK(cfg.roster[1].role == Role::HDV);
  CHECK(cfg.roster[4].role == Role::HDV);
  CHECK(cfg.roster[7].role == Role::HDV);
  CHECK(cfg.roster[7].realm == Realm::ExternalVirtual);
  REQUIRE(cfg.perturbations.size() == 2);
  CHECK(cfg.perturbations[0].profile.t0 == 30.0);
  CHECK(cfg.perturbations[1].profile.t0 == 75.0);
  CHECK(cfg.links.size() == 10);
  CHECK(cfg.ticks() == 6000);

  const auto cacc = all_cacc(cfg);
  for (std::size_t i = 1; i < cacc.roster.size(); ++i) CHECK(cacc.roster[i].role == Role::CACC);
  CHECK(cacc.name == "default_platoon_all_cacc");
}

TEST_CASE("json round trip is lossless") {
  const auto cfg = default_scenario();
  const json j = config_to_json(cfg);
  CHECK(config_to_json(config_from_json(j)) == j);
}

TEST_CASE("shipped config files match the built-in scenarios") {
  CHECK(config_to_json(load_config(kConfigs / "default_platoon.json")) == config_to_json(default_scenario()));
  CHECK(config_to_json(load_config(kConfigs / "all_cacc.json")) == config_to_json(all_cacc(default_scenario())));
}

TEST_CASE("schema errors name the offending path") {
  json j = config_to_json(default_scenario());
  j["cacc"]["time_gapp"] = 0.6;
  try {
    config_from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cacc.time_gapp") != std::string::npos);
  }
  j = config_to_json(default_scenario());
  j["roster"][0]["role"] = "Captain";
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::array()), ConfigError);
}

TEST_CASE("missing config file") {
  try {
    load_config("/nonexistent/nowhere.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("config not found") != std::string::npos);
  }
}

TEST_CASE("two heads is an error naming both") {
  auto cfg = default_scenario();
  cfg.roster[3].role = Role::Head;
  const auto errors = only(validate_config(cfg), Diagnostic::Severity::Error);
  REQUIRE(errors.size() >= 1);
  bool named = false;
  for (const auto& e : errors) {
    named |= e.message.find("PhysicalVehicle#1") != std::string::npos &&
             e.message.find(to_string(cfg.roster[3].id)) != std::string::npos;
  }
  CHECK(named);
}

TEST_CASE("default config carries only the p99 consistency warning for links 3 and 4") {
  const auto diags = validate_config(default_scenario());
  CHECK_FALSE(has_errors(diags));
  REQUIRE(diags.size() == 2);
  CHECK(diags[0].path == "links[2].p99");
  CHECK(diags[1].path == "links[3].p99");
  CHECK(diags[0].message.find("2.326") != std::string::npos);
}

TEST_CASE("semantic errors") {
  auto cfg = default_scenario();
  cfg.roster[2].id = cfg.roster[1].id;
  CHECK(has_errors(validate_config(cfg)));

  cfg = default_scenario();
  cfg.fusion.weights[Source::Native] = -0.1;
  CHECK(has_errors(validate_config(cfg)));

  cfg = default_scenario();
  cfg.thresholds.collision_gap = 6.0;
  CHECK(has_errors(validate_config(cfg)));

  cfg = default_scenario();
  cfg.tick = 0.0;
  CHECK(has_errors(validate_config(cfg)));
}

}

TEST_SUITE("cli") {

TEST_CASE("run twice with the same seed gives identical artifacts, replay reproduces them") {
  const auto a = scratch("a"), b = scratch("b");
  const std::string base = "run --config default_platoon --seed 7 --duration-override 40 --out ";
  REQUIRE(cli(base + a.string()).code == 0);
  REQUIRE(cli(base + b.string()).code == 0);
  for (const char* f : {"timeseries.csv", "events.jsonl", "report.json"}) {
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  }

  const auto r = scratch("replay");
  REQUIRE(cli("replay " + (a / "manifest.json").string() + " --out " + r.string()).code == 0);
  CHECK(slurp(r / "timeseries.csv") == slurp(a / "timeseries.csv"));
  CHECK(slurp(r / "events.jsonl") == slurp(a / "events.jsonl"));

  const auto other = scratch("other");
  REQUIRE(cli("replay " + (a / "manifest.json").string() + " --seed 8 --out " + other.string()).code == 0);
  CHECK(slurp(other / "timeseries.csv") != slurp(a / "timeseries.csv"));

  const json m = json::parse(slurp(a / "manifest.json"));
  CHECK(m["seed"] == 7);
  CHECK(m["mode"] == "deterministic");
  CHECK(m["duration_override"] == 40.0);
  CHECK(m["config"]["duration"] == 40.0);
}

TEST_CASE("replay refuses live runs") {
  const auto dir = scratch("live_manifest");
  fs::create_directories(dir);
  json m = {{"config_path", "x"}, {"seed", 7}, {"mode", "live"}, {"config", config_to_json(default_scenario())}};
  std::ofstream(dir / "manifest.json") << m.dump();
  const auto r = cli("replay " + (dir / "manifest.json").string());
  CHECK(r.code == 2);
  CHECK(r.out.find("live") != std::string::npos);
}

TEST_CASE("config errors exit 2 with a JSON error on stderr") {
  const auto r = cli("run --config no_such_scenario");
  CHECK(r.code == 2);
  const json err = json::parse(r.out.substr(r.out.find('{')));
  CHECK(err["exit_code"] == 2);
  CHECK(err["message"].get<std::string>().find("config not found") != std::string::npos);

  CHECK(cli("run --config default_platoon --listen 127.0.0.1:7070 --duration-override 1 --out " +
            scratch("forbid").string())
            .code == 2);
}

TEST_CASE("validate exits 0 on warnings and 2 on errors") {
  const auto ok = cli("validate --config default_platoon");
  CHECK(ok.code == 0);
  CHECK(json::parse(ok.out)["clean"] == false);

  const auto dir = scratch("bad_cfg");
  fs::create_directories(dir);
  auto cfg = default_scenario();
  cfg.roster[3].role = Role::Head;
  std::ofstream(dir / "two_heads.json") << config_to_json(cfg).dump();
  const auto bad = cli("validate --config " + (dir / "two_heads.json").string());
  CHECK(bad.code == 2);
  CHECK(bad.out.find("more than one Head") != std::string::npos);
}

TEST_CASE("usage errors exit 4") {
  CHECK(cli("").code == 4);
  CHECK(cli("run").code == 4);
  CHECK(cli("run --config default_platoon --mode turbo").code == 4);
}

}
