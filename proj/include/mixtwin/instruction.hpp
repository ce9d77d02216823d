#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mixtwin/dynamics.hpp"
#include "mixtwin/entity.hpp"
#include "mixtwin/frame.hpp"
#include "mixtwin/path.hpp"

namespace mixtwin {

struct SetTargetSpeed {
  double speed = 0.0;  // m/s
  bool operator==(const SetTargetSpeed&) const = default;
};
struct SetSteering {
  double angle = 0.0;  // rad
  bool operator==(const SetSteering&) const = default;
};
struct SetSpeedProfile {
  SpeedProfile profile;
};
struct FacilitySet {
  FacilityStatus status = FacilityStatus::Off;
  bool operator==(const FacilitySet&) const = default;
};
struct SpawnObstacle {
  Point2 point;
};
// Hands a vehicle held by an operator back to its automatic controller.
struct ReleaseControl {
  bool operator==(const ReleaseControl&) const = default;
};

using InstructionBody =
    std::variant<SetTargetSpeed, SetSteering, SetSpeedProfile, FacilitySet, SpawnObstacle, ReleaseControl>;

enum class Origin : std::uint8_t { Controller, Operator, Scenario };

std::string_view to_string(Origin origin);
std::optional<Origin> parse_origin(std::string_view text);
std::string_view instruction_name(const InstructionBody& body);

struct Instruction {
  EntityId target;
  InstructionBody body;
  double issued_at = 0.0;
  Origin origin = Origin::Controller;
};

bool body_compatible(const InstructionBody& body, EntityKind target_kind);

// Raw operator action as sent by an HMI device.
struct IntentMessage {
  std::uint64_t intent_id = 0;
  std::string device;
  std::string action;
  std::optional<EntityId> focus_entity;
  std::optional<Point2> focus_point;
  std::map<std::string, double> payload;
};

enum class TemplateMode {
  RelativeSpeed,   // current target + delta
  AbsoluteSpeed,   // payload[key]
  AbsoluteSteer,   // payload[key]
  SuddenBrake,     // brake profile starting now
  Sinusoid,        // payload "amplitude" (m/s), "frequency" (Hz)
  FacilityOpen,
  FacilityClose,
  FacilityOn,
  FacilityOff,
  FacilityToggle,
  ObstacleAtPoint,
  Release,
};

std::string_view to_string(TemplateMode mode);
std::optional<TemplateMode> parse_template_mode(std::string_view text);

struct IntentTemplate {
  TemplateMode mode = TemplateMode::RelativeSpeed;
  double delta = 0.0;  // RelativeSpeed step, m/s
  std::string key;     // payload key for absolute values
};

// One speed "unit" for operator nudges: 1 km/h.
inline constexpr double kSpeedUnit = 1.0 / 3.6;

class InteractionLogicTable {
 public:
  InteractionLogicTable() = default;
  explicit InteractionLogicTable(std::map<std::string, IntentTemplate> entries);

  // speed_up, speed_down, set_speed, steer, brake_head, sine_perturb,
  // gate_open, gate_close, light_on, light_off, light_toggle,
  // spawn_obstacle, release.
  static InteractionLogicTable defaults();

  const IntentTemplate* find(const std::string& action) const;
  const std::map<std::string, IntentTemplate>& entries() const { return entries_; }

 private:
  std::map<std::string, IntentTemplate> entries_;
};

enum class CommandFormat : std::uint8_t {
  Kinematic,     // in-process vehicle, native kinematic command
  WireProtocol,  // external client speaking the text protocol
  ControlBoard,  // facility behind the roadside control board
};

std::string_view to_string(CommandFormat format);
std::optional<CommandFormat> parse_command_format(std::string_view text);

struct CommandBounds {
  double speed_max = 5.0;         // m/s, mixed
  double steer_max = 0.5236;      // rad
  double steer_rate_max = 3.49;   // rad/s
};

struct DispatchEntry {
  FrameTransform transform;
  CommandFormat format = CommandFormat::Kinematic;
  CommandBounds bounds;
};

using DispatchTable = std::map<EntityId, DispatchEntry>;

struct RoadBounds {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 126.0;
  double y_max = 70.0;
  bool contains(Point2 p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
};

}  // namespace mixtwin
