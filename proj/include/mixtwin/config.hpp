#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixtwin/dynamics.hpp"
#include "mixtwin/emulation.hpp"
#include "mixtwin/entity_sim.hpp"
#include "mixtwin/fusion.hpp"
#include "mixtwin/instruction.hpp"
#include "mixtwin/net.hpp"

namespace mixtwin {

enum class Role { Head, CACC, HDV, LiveHuman };

std::string_view to_string(Role role);
std::optional<Role> parse_role(std::string_view text);

struct RosterEntry {
  EntityId id;
  Realm realm = Realm::Virtual;
  Role role = Role::CACC;
  double join_time = 0.0;     // s; ExternalVirtual vehicles connect at this time
  double phase_offset = 0.0;  // s; report send offset within the tick
};

struct Perturbation {
  enum class Trigger { AtTime, Operator };
  std::optional<EntityId> target;  // defaults to the Head vehicle
  SpeedProfile profile;            // profile.t0 is the trigger time
  Trigger trigger = Trigger::AtTime;
};

struct TrackConfig {
  Point2 center{63.0, 35.0};
  double straight = 70.0;  // m
  double radius = 25.0;    // m
};

// Uplink/downlink ids per entity class.
struct LinkAssignment {
  int physical_up = 1, physical_down = 2;
  int virtual_up = 3, virtual_down = 4;
  int hmi_up = 5, hmi_down = 6;
  int external_up = 7, external_down = 8;
  int rsu_up = 9, rsu_down = 10;
};

struct VehicleLimits {
  double accel_limit = 3.0;   // m/s^2, mixed
  double wheelbase = kDefaultWheelbase;
  CommandBounds bounds;
  double fail_safe_after = 1.0;
  bool brake_on_command_loss = false;
};

struct Thresholds {
  double warn_gap = 5.0;       // m
  double collision_gap = 3.0;  // m
};

struct ScenarioConfig {
  std::string name = "default_platoon";
  double duration = 120.0;  // s
  double tick = 0.02;       // s
  double stale_flag_after = 0.1;
  std::size_t subscriber_capacity = 256;
  TrackConfig track;
  RoadBounds road;
  FusionPolicy fusion;
  CaccParams cacc;
  HdvParams hdv;
  LateralParams lateral;
  VehicleLimits vehicle;
  SensorModel sensor;
  std::vector<LinkSpec> links;
  LinkAssignment assignment;
  std::vector<RosterEntry> roster;
  std::vector<Perturbation> perturbations;
  Thresholds thresholds;
  ChannelMap channels;
  InteractionLogicTable logic;
  double gate_travel_time = 1.0;
  double rsu_poll_period = 0.1;  // s
  double settle_time = 15.0;     // s after the last finite perturbation ends

  std::size_t ticks() const;
  const RosterEntry& head() const;  // throws ConfigError if missing
};

/// The shipped experiment: eight vehicles, HDVs at positions 2, 5, 8,
/// brakes at 30 s and 75 s, link statistics from the reference
/// measurements.
ScenarioConfig default_scenario();
std::vector<LinkSpec> reference_links();

/// Same roster with every non-head vehicle set to CACC.
ScenarioConfig all_cacc(ScenarioConfig cfg);

/// Schema-level parse; throws ConfigError naming the offending path.
ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& cfg);
ScenarioConfig load_config(const std::filesystem::path& path);

struct Diagnostic {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::string path;
  std::string message;
};

/// Semantic checks: one Head, unique ids, fusion weights, link assignment,
/// p99 consistency (warning), parameter domains.
std::vector<Diagnostic> validate_config(const ScenarioConfig& cfg);
bool has_errors(const std::vector<Diagnostic>& diagnostics);

}  // namespace mixtwin
