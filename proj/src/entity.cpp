#include "mixtwin/entity.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <utility>

namespace mixtwin {

namespace {

constexpr std::array<std::pair<EntityKind, std::string_view>, 7> kKindNames{{
    {EntityKind::PhysicalVehicle, "PhysicalVehicle"},
    {EntityKind::VirtualVehicle, "VirtualVehicle"},
    {EntityKind::Streetlight, "Streetlight"},
    {EntityKind::TrafficSignal, "TrafficSignal"},
    {EntityKind::BarrierGate, "BarrierGate"},
    {EntityKind::Obstacle, "Obstacle"},
    {EntityKind::Sensor, "Sensor"},
}};

constexpr std::array<std::pair<Source, std::string_view>, 3> kSourceNames{{
    {Source::Onboard, "onboard"},
    {Source::Roadside, "roadside"},
    {Source::Native, "native"},
}};

constexpr std::array<std::pair<FacilityStatus, std::string_view>, 4> kStatusNames{{
    {FacilityStatus::Off, "off"},
    {FacilityStatus::On, "on"},
    {FacilityStatus::Closed, "closed"},
    {FacilityStatus::Open, "open"},
}};

}  // namespace

bool is_vehicle(EntityKind kind) {
  return kind == EntityKind::PhysicalVehicle || kind == EntityKind::VirtualVehicle;
}

bool is_facility(EntityKind kind) {
  return kind == EntityKind::Streetlight || kind == EntityKind::TrafficSignal ||
         kind == EntityKind::BarrierGate;
}

std::string_view to_string(EntityKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "Unknown";
}

std::optional<EntityKind> parse_entity_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

std::string to_string(const EntityId& id) {
  std::string out{to_string(id.kind)};
  out += '#';
  out += std::to_string(id.index);
  return out;
}

std::optional<EntityId> parse_entity_id(std::string_view text) {
  const auto hash = text.find('#');
  if (hash == std::string_view::npos) return std::nullopt;
  auto kind = parse_entity_kind(text.substr(0, hash));
  if (!kind) return std::nullopt;
  const auto digits = text.substr(hash + 1);
  std::uint32_t index = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty()) {
    return std::nullopt;
  }
  return EntityId{*kind, index};
}

std::string_view to_string(Source source) {
  for (const auto& [s, name] : kSourceNames) {
    if (s == source) return name;
  }
  return "unknown";
}

std::optional<Source> parse_source(std::string_view text) {
  for (const auto& [s, name] : kSourceNames) {
    if (name == text) return s;
  }
  return std::nullopt;
}

std::string_view to_string(FacilityStatus status) {
  for (const auto& [s, name] : kStatusNames) {
    if (s == status) return name;
  }
  return "unknown";
}

std::optional<FacilityStatus> parse_facility_status(std::string_view text) {
  for (const auto& [s, name] : kStatusNames) {
    if (name == text) return s;
  }
  return std::nullopt;
}

bool status_matches_kind(FacilityStatus status, EntityKind kind) {
  switch (kind) {
    case EntityKind::Streetlight:
    case EntityKind::TrafficSignal:
      return status == FacilityStatus::Off || status == FacilityStatus::On;
    case EntityKind::BarrierGate:
      return status == FacilityStatus::Closed || status == FacilityStatus::Open;
    default:
      return false;
  }
}

bool status_bit(FacilityStatus status) {
  return status == FacilityStatus::On || status == FacilityStatus::Open;
}

FacilityStatus status_from_bit(EntityKind kind, bool bit) {
  if (kind == EntityKind::BarrierGate) return bit ? FacilityStatus::Open : FacilityStatus::Closed;
  return bit ? FacilityStatus::On : FacilityStatus::Off;
}

double normalize_angle(double angle) {
  double wrapped = std::remainder(angle, 2.0 * kPi);
  if (wrapped <= -kPi) wrapped += 2.0 * kPi;
  return wrapped;
}

}  // namespace mixtwin
