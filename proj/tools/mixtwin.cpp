#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixtwin/config.hpp"
#include "mixtwin/engine.hpp"
#include "mixtwin/errors.hpp"
#include "mixtwin/live.hpp"
#include "mixtwin/metrics.hpp"

#ifndef MIXTWIN_CONFIG_DIR
#define MIXTWIN_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mixtwin;

namespace {

// Exit codes. Kept stable; scripts depend on them.
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;
constexpr int kUsageError = 4;

enum class Verbosity { Quiet, Info, Debug };

Verbosity verbosity() {
  const char* v = std::getenv("MIXTWIN_LOG");
  if (!v) return Verbosity::Info;
  const std::string s = v;
  if (s == "quiet" || s == "0") return Verbosity::Quiet;
  if (s == "debug" || s == "2") return Verbosity::Debug;
  return Verbosity::Info;
}

void info(const std::string& msg) {
  if (verbosity() != Verbosity::Quiet) std::cerr << msg << '\n';
}

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"exit_code", code}, {"message", message}}.dump() << '\n';
  return code;
}

struct ConfigFailure {
  std::string message;
};

fs::path resolve_config(const std::string& name) {
  const fs::path direct(name);
  if (fs::exists(direct)) return direct;
  if (direct.extension().empty() && direct.parent_path().empty()) {
    for (const fs::path dir : {fs::path("configs"), fs::path(MIXTWIN_CONFIG_DIR)}) {
      const fs::path candidate = dir / (name + ".json");
      if (fs::exists(candidate)) return candidate;
    }
  }
  throw ConfigError("config not found: " + name);
}

std::string describe(const Diagnostic& d) {
  return std::string(d.severity == Diagnostic::Severity::Error ? "error" : "warning") + " " + d.path + ": " +
         d.message;
}

void check_config(const ScenarioConfig& cfg) {
  const auto diags = validate_config(cfg);
  for (const auto& d : diags) {
    if (d.severity == Diagnostic::Severity::Warning) info(describe(d));
  }
  if (has_errors(diags)) {
    std::string msg;
    for (const auto& d : diags) {
      if (d.severity == Diagnostic::Severity::Error) msg += (msg.empty() ? "" : "; ") + d.path + ": " + d.message;
    }
    throw ConfigError(msg);
  }
}

struct RunRequest {
  std::string config_path;
  ScenarioConfig config;
  std::uint64_t seed = 7;
  std::string mode = "deterministic";
  fs::path out;
  std::string listen;
  std::optional<double> duration_override;
};

json manifest_json(const RunRequest& r) {
  json m{{"config_path", r.config_path}, {"seed", r.seed},          {"mode", r.mode},
         {"out", r.out.string()},        {"config", config_to_json(r.config)}};
  m["listen"] = r.listen.empty() ? json(nullptr) : json(r.listen);
  m["duration_override"] = r.duration_override ? json(*r.duration_override) : json(nullptr);
  return m;
}

int execute(RunRequest r) {
  if (r.duration_override) r.config.duration = *r.duration_override;
  check_config(r.config);
  if (r.mode == "deterministic" && !r.listen.empty()) {
    throw ConfigError("deterministic mode forbids live connections; use --mode live with --listen");
  }

  RunOutput result;
  if (r.mode == "live") {
    if (r.listen.empty()) r.listen = "127.0.0.1:7070";
    Simulation sim(r.config, r.seed);
    LiveServer server(sim, parse_endpoint(r.listen));
    info("listening on " + r.listen.substr(0, r.listen.rfind(':') + 1) + std::to_string(server.port()));
    server.run();
    result.record = sim.finish();
    result.report = sim.report(result.record);
  } else {
    result = run_with_report(r.config, r.seed);
  }

  export_results(result.record, result.report, r.out);
  {
    std::ofstream f(r.out / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!f) throw ReportError("cannot write " + (r.out / "manifest.json").string());
    f << manifest_json(r).dump(2) << '\n';
  }
  if (verbosity() == Verbosity::Debug) {
    for (const auto& e : result.record.events) std::cerr << event_to_json(e).dump() << '\n';
  }
  info("wrote " + r.out.string() + " (" + std::to_string(result.record.rows()) + " ticks, " +
       std::to_string(result.record.events.size()) + " events" + (result.record.partial ? ", partial" : "") + ")");
  if (result.record.partial) return fail(kRuntimeError, "runtime", "run aborted: " + result.record.partial_reason);
  return kOk;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    return fail(kConfigError, "config", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(kConfigError, "config", e.what());
  } catch (const std::exception& e) {
    return fail(kRuntimeError, "runtime", e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixtwin: mixed digital-twin platoon testbed"};
  app.require_subcommand(1);

  RunRequest run;
  std::string config_name;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write time series, events, report and manifest");
  run_cmd->add_option("--config", config_name, "Config file, or a name under configs/")->required();
  run_cmd->add_option("--seed", run.seed, "Random seed")->capture_default_str();
  run_cmd->add_option("--mode", run.mode, "deterministic | live")
      ->check(CLI::IsMember({"deterministic", "live"}))
      ->capture_default_str();
  run_cmd->add_option("--out", run.out, "Output directory (default out/<scenario>_seed<seed>)");
  run_cmd->add_option("--listen", run.listen, "host:port for console connections (live mode)");
  run_cmd->add_option("--duration-override", run.duration_override, "Simulated seconds")
      ->check(CLI::NonNegativeNumber);

  std::string validate_name;
  auto* validate_cmd = app.add_subcommand("validate", "Check a config; exit 0 iff no errors");
  validate_cmd->add_option("--config", validate_name, "Config file or name")->required();

  std::string manifest_path;
  std::optional<std::uint64_t> replay_seed;
  fs::path replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a deterministic run from its manifest");
  replay_cmd->add_option("manifest", manifest_path, "manifest.json of a prior run")->required();
  replay_cmd->add_option("--seed", replay_seed, "Override the recorded seed");
  replay_cmd->add_option("--out", replay_out, "Output directory (default <run dir>/replay)");

  std::string show_name;
  std::string builtin;
  auto* show_cmd = app.add_subcommand("show-config", "Print a resolved config as JSON");
  auto* show_opt = show_cmd->add_option("--config", show_name, "Config file or name");
  show_cmd->add_option("--builtin", builtin, "default_platoon | all_cacc")
      ->check(CLI::IsMember({"default_platoon", "all_cacc"}))
      ->excludes(show_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  if (*run_cmd) {
    return guarded([&] {
      const fs::path path = resolve_config(config_name);
      run.config_path = path.string();
      run.config = load_config(path);
      if (run.out.empty()) run.out = fs::path("out") / (run.config.name + "_seed" + std::to_string(run.seed));
      return execute(run);
    });
  }

  if (*validate_cmd) {
    return guarded([&] {
      const ScenarioConfig cfg = load_config(resolve_config(validate_name));
      const auto diags = validate_config(cfg);
      json out = json::array();
      for (const auto& d : diags) {
        out.push_back({{"severity", d.severity == Diagnostic::Severity::Error ? "error" : "warning"},
                       {"path", d.path},
                       {"message", d.message}});
      }
      std::cout << json{{"config", cfg.name}, {"clean", diags.empty()}, {"diagnostics", out}}.dump(2) << '\n';
      return has_errors(diags) ? kConfigError : kOk;
    });
  }

  if (*replay_cmd) {
    return guarded([&] {
      std::ifstream in(manifest_path);
      if (!in) throw ConfigError("manifest not found: " + manifest_path);
      json m;
      try {
        m = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError(manifest_path + ": " + e.what());
      }
      if (m.value("mode", "") != "deterministic") {
        throw ConfigError("cannot replay a " + m.value("mode", std::string("unknown")) +
                          "-mode run: live operator input was not recorded, so its artifacts are not reproducible");
      }
      RunRequest r;
      try {
        r.config_path = m.at("config_path").get<std::string>();
        r.config = config_from_json(m.at("config"));
        r.seed = replay_seed.value_or(m.at("seed").get<std::uint64_t>());
      } catch (const json::exception& e) {
        throw ConfigError(manifest_path + ": " + e.what());
      }
      // The recorded config already carries any duration override.
      r.out = replay_out.empty() ? fs::path(manifest_path).parent_path() / "replay" : replay_out;
      return execute(r);
    });
  }

  if (*show_cmd) {
    return guarded([&] {
      ScenarioConfig cfg;
      if (!builtin.empty()) {
        cfg = builtin == "all_cacc" ? all_cacc(default_scenario()) : default_scenario();
      } else if (!show_name.empty()) {
        cfg = load_config(resolve_config(show_name));
      } else {
        throw ConfigError("show-config needs --config or --builtin");
      }
      std::cout << config_to_json(cfg).dump(2) << '\n';
      return kOk;
    });
  }
  return kUsageError;
}
