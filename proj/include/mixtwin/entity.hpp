#pragma once

#include <compare>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

namespace mixtwin {

enum class EntityKind : std::uint8_t {
  PhysicalVehicle,
  VirtualVehicle,
  Streetlight,
  TrafficSignal,
  BarrierGate,
  Obstacle,
  Sensor,
};

struct EntityId {
  EntityKind kind = EntityKind::VirtualVehicle;
  std::uint32_t index = 0;

  auto operator<=>(const EntityId&) const = default;
};

bool is_vehicle(EntityKind kind);
bool is_facility(EntityKind kind);

std::string_view to_string(EntityKind kind);
std::optional<EntityKind> parse_entity_kind(std::string_view text);

// "PhysicalVehicle#3"
std::string to_string(const EntityId& id);
std::optional<EntityId> parse_entity_id(std::string_view text);

enum class Source : std::uint8_t { Onboard, Roadside, Native };

std::string_view to_string(Source source);
std::optional<Source> parse_source(std::string_view text);

struct MixedFrameTag {};
struct NativeFrameTag {};

// Pose/velocity record of one entity. The frame tag keeps mixed-space and
// native-testbed values from being mixed up at compile time.
template <class Frame>
struct EntityStateIn {
  EntityId id;
  double t = 0.0;        // s, hub clock
  double x = 0.0;        // m
  double y = 0.0;        // m
  double heading = 0.0;  // rad, (-pi, pi]
  double speed = 0.0;    // m/s, >= 0
  double yaw_rate = 0.0; // rad/s
  double accel = 0.0;    // m/s^2
  Source source = Source::Native;

  bool operator==(const EntityStateIn&) const = default;
};

using MixedEntityState = EntityStateIn<MixedFrameTag>;
using NativeState = EntityStateIn<NativeFrameTag>;

enum class FacilityStatus : std::uint8_t { Off, On, Closed, Open };

std::string_view to_string(FacilityStatus status);
std::optional<FacilityStatus> parse_facility_status(std::string_view text);

// Lights and signals take {Off, On}; gates take {Closed, Open}.
bool status_matches_kind(FacilityStatus status, EntityKind kind);
// Status bit as stored on the control board (1 = On/Open).
bool status_bit(FacilityStatus status);
FacilityStatus status_from_bit(EntityKind kind, bool bit);

struct FacilityState {
  EntityId id;
  int channel = -1;  // control-board channel, -1 for purely virtual facilities
  FacilityStatus status = FacilityStatus::Off;
  double t = 0.0;

  bool operator==(const FacilityState&) const = default;
};

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double angle);

}  // namespace mixtwin
