#include "mixtwin/instruction.hpp"

#include <array>
#include <stdexcept>
#include <utility>

namespace mixtwin {

namespace {

constexpr std::array<std::pair<TemplateMode, std::string_view>, 12> kModeNames{{
    {TemplateMode::RelativeSpeed, "relative_speed"},
    {TemplateMode::AbsoluteSpeed, "absolute_speed"},
    {TemplateMode::AbsoluteSteer, "absolute_steer"},
    {TemplateMode::SuddenBrake, "sudden_brake"},
    {TemplateMode::Sinusoid, "sinusoid"},
    {TemplateMode::FacilityOpen, "facility_open"},
    {TemplateMode::FacilityClose, "facility_close"},
    {TemplateMode::FacilityOn, "facility_on"},
    {TemplateMode::FacilityOff, "facility_off"},
    {TemplateMode::FacilityToggle, "facility_toggle"},
    {TemplateMode::ObstacleAtPoint, "obstacle_at_point"},
    {TemplateMode::Release, "release"},
}};

}  // namespace

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::Controller: return "controller";
    case Origin::Operator: return "operator";
    case Origin::Scenario: return "scenario";
  }
  return "unknown";
}

std::optional<Origin> parse_origin(std::string_view text) {
  for (Origin o : {Origin::Controller, Origin::Operator, Origin::Scenario}) {
    if (to_string(o) == text) return o;
  }
  return std::nullopt;
}

std::string_view instruction_name(const InstructionBody& body) {
  struct Visitor {
    std::string_view operator()(const SetTargetSpeed&) const { return "SetTargetSpeed"; }
    std::string_view operator()(const SetSteering&) const { return "SetSteering"; }
    std::string_view operator()(const SetSpeedProfile&) const { return "SetSpeedProfile"; }
    std::string_view operator()(const FacilitySet&) const { return "FacilitySet"; }
    std::string_view operator()(const SpawnObstacle&) const { return "SpawnObstacle"; }
    std::string_view operator()(const ReleaseControl&) const { return "ReleaseControl"; }
  };
  return std::visit(Visitor{}, body);
}

bool body_compatible(const InstructionBody& body, EntityKind kind) {
  if (std::holds_alternative<FacilitySet>(body)) return is_facility(kind);
  if (std::holds_alternative<SpawnObstacle>(body)) return kind == EntityKind::Obstacle;
  return is_vehicle(kind);
}

std::string_view to_string(TemplateMode mode) {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  return "unknown";
}

std::optional<TemplateMode> parse_template_mode(std::string_view text) {
  for (const auto& [m, name] : kModeNames) {
    if (name == text) return m;
  }
  return std::nullopt;
}

InteractionLogicTable::InteractionLogicTable(std::map<std::string, IntentTemplate> entries)
    : entries_(std::move(entries)) {
  for (const auto& [action, tpl] : entries_) {
    if (action.empty()) throw std::invalid_argument("interaction table has an empty action");
    const bool needs_key = tpl.mode == TemplateMode::AbsoluteSpeed ||
                           tpl.mode == TemplateMode::AbsoluteSteer;
    if (needs_key && tpl.key.empty()) {
      throw std::invalid_argument("action '" + action + "' needs a payload key");
    }
  }
}

InteractionLogicTable InteractionLogicTable::defaults() {
  std::map<std::string, IntentTemplate> e;
  e["speed_up"] = {TemplateMode::RelativeSpeed, kSpeedUnit, {}};
  e["speed_down"] = {TemplateMode::RelativeSpeed, -kSpeedUnit, {}};
  e["set_speed"] = {TemplateMode::AbsoluteSpeed, 0.0, "speed"};
  e["steer"] = {TemplateMode::AbsoluteSteer, 0.0, "angle"};
  e["brake_head"] = {TemplateMode::SuddenBrake, 0.0, {}};
  e["sine_perturb"] = {TemplateMode::Sinusoid, 0.0, {}};
  e["gate_open"] = {TemplateMode::FacilityOpen, 0.0, {}};
  e["gate_close"] = {TemplateMode::FacilityClose, 0.0, {}};
  e["light_on"] = {TemplateMode::FacilityOn, 0.0, {}};
  e["light_off"] = {TemplateMode::FacilityOff, 0.0, {}};
  e["light_toggle"] = {TemplateMode::FacilityToggle, 0.0, {}};
  e["spawn_obstacle"] = {TemplateMode::ObstacleAtPoint, 0.0, {}};
  e["release"] = {TemplateMode::Release, 0.0, {}};
  return InteractionLogicTable(std::move(e));
}

const IntentTemplate* InteractionLogicTable::find(const std::string& action) const {
  auto it = entries_.find(action);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string_view to_string(CommandFormat format) {
  switch (format) {
    case CommandFormat::Kinematic: return "kinematic";
    case CommandFormat::WireProtocol: return "wire";
    case CommandFormat::ControlBoard: return "control_board";
  }
  return "unknown";
}

std::optional<CommandFormat> parse_command_format(std::string_view text) {
  for (auto f : {CommandFormat::Kinematic, CommandFormat::WireProtocol, CommandFormat::ControlBoard}) {
    if (to_string(f) == text) return f;
  }
  return std::nullopt;
}

}  // namespace mixtwin
