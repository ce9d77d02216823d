#include <doctest.h>

#include <cmath>
#include <random>

#include "mixtwin/errors.hpp"
#include "mixtwin/frame.hpp"

using namespace mixtwin;

TEST_SUITE("frame") {

TEST_CASE("entity ids print and parse") {
  const EntityId id{EntityKind::PhysicalVehicle, 3};
  CHECK(to_string(id) == "PhysicalVehicle#3");
  CHECK(parse_entity_id("PhysicalVehicle#3") == id);
  CHECK(parse_entity_id("BarrierGate#0") == EntityId{EntityKind::BarrierGate, 0});
  CHECK_FALSE(parse_entity_id("Vehicle#3"));
  CHECK_FALSE(parse_entity_id("PhysicalVehicle#"));
  CHECK_FALSE(parse_entity_id("PhysicalVehicle#-1"));
  CHECK_FALSE(parse_entity_id("PhysicalVehicle3"));
  CHECK(is_vehicle(EntityKind::VirtualVehicle));
  CHECK_FALSE(is_vehicle(EntityKind::Obstacle));
  CHECK(is_facility(EntityKind::TrafficSignal));
}

TEST_CASE("facility status domain follows kind") {
  CHECK(status_matches_kind(FacilityStatus::Open, EntityKind::BarrierGate));
  CHECK_FALSE(status_matches_kind(FacilityStatus::On, EntityKind::BarrierGate));
  CHECK(status_matches_kind(FacilityStatus::Off, EntityKind::Streetlight));
  CHECK_FALSE(status_matches_kind(FacilityStatus::Closed, EntityKind::TrafficSignal));
  CHECK(status_from_bit(EntityKind::BarrierGate, true) == FacilityStatus::Open);
  CHECK(status_from_bit(EntityKind::Streetlight, false) == FacilityStatus::Off);
  CHECK(status_bit(FacilityStatus::Open));
  CHECK_FALSE(status_bit(FacilityStatus::Closed));
}

TEST_CASE("angles wrap into (-pi, pi]") {
  CHECK(normalize_angle(kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(-kPi) == doctest::Approx(kPi));
  CHECK(normalize_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
  CHECK(normalize_angle(0.3 + 4 * kPi) == doctest::Approx(0.3));
}

TEST_CASE("physical speed 0.2 m/s at scale 14 is 2.8 m/s mixed") {
  NativeState n;
  n.id = {EntityKind::PhysicalVehicle, 1};
  n.speed = 0.2;
  const auto m = to_mixed_frame(n, FrameTransform::scaled(kPhysicalTestbedScale));
  CHECK(m.speed == doctest::Approx(2.8).epsilon(1e-12));
}

TEST_CASE("identity transform leaves any state unchanged") {
  NativeState n{{EntityKind::VirtualVehicle, 4}, 1.5, 10.0, -3.0, 0.7, 2.8, 0.1, -0.3, Source::Roadside};
  const auto m = to_mixed_frame(n, FrameTransform::identity());
  CHECK(m.x == n.x);
  CHECK(m.y == n.y);
  CHECK(m.heading == n.heading);
  CHECK(m.speed == n.speed);
  CHECK(m.accel == n.accel);
  CHECK(m.source == Source::Roadside);
}

TEST_CASE("positions scale and divide by 14") {
  NativeState n;
  n.x = 0.5;
  n.y = 0.25;
  const auto f = FrameTransform::scaled(14.0);
  const auto m = to_mixed_frame(n, f);
  CHECK(m.x == doctest::Approx(7.0));
  CHECK(m.y == doctest::Approx(3.5));

  MixedEntityState back;
  back.x = 7.0;
  back.y = 3.5;
  const auto nb = from_mixed_frame(back, f);
  CHECK(nb.x == doctest::Approx(0.5));
  CHECK(nb.y == doctest::Approx(0.25));
  CHECK(speed_to_native(2.8, f) == doctest::Approx(0.2));
}

TEST_CASE("rotation and offset are applied after scaling") {
  NativeState n;
  n.x = 1.0;
  n.heading = 0.0;
  const FrameTransform f{2.0, 10.0, 5.0, kPi / 2};
  const auto m = to_mixed_frame(n, f);
  CHECK(m.x == doctest::Approx(10.0));
  CHECK(m.y == doctest::Approx(7.0));
  CHECK(m.heading == doctest::Approx(kPi / 2));
}

TEST_CASE("round trip of random finite states is exact to 1e-12") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-100.0, 100.0);
  std::uniform_real_distribution<double> ang(-3.1, 3.1);
  std::uniform_real_distribution<double> spd(0.0, 5.0);
  std::uniform_real_distribution<double> scale(0.5, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const FrameTransform f{scale(rng), pos(rng), pos(rng), ang(rng)};
    MixedEntityState m{{EntityKind::PhysicalVehicle, 1}, 2.0, pos(rng), pos(rng), ang(rng), spd(rng), 0.2, 0.1,
                       Source::Onboard};
    const auto r = to_mixed_frame(from_mixed_frame(m, f), f);
    CHECK(std::abs(r.x - m.x) <= 1e-12 * std::max(1.0, std::abs(m.x)) * 10);
    CHECK(std::abs(r.y - m.y) <= 1e-12 * std::max(1.0, std::abs(m.y)) * 10);
    CHECK(std::abs(r.speed - m.speed) <= 1e-12);
    CHECK(std::abs(normalize_angle(r.heading - m.heading)) <= 1e-12);
  }
}

TEST_CASE("invalid transforms and states are rejected") {
  NativeState n;
  CHECK_THROWS_AS(to_mixed_frame(n, FrameTransform::scaled(0.0)), FrameConversionError);
  CHECK_THROWS_AS(to_mixed_frame(n, FrameTransform::scaled(-14.0)), FrameConversionError);
  n.x = std::nan("");
  CHECK_THROWS_AS(to_mixed_frame(n, FrameTransform::identity()), FrameConversionError);
  CHECK_THROWS_AS(speed_to_native(INFINITY, FrameTransform::identity()), FrameConversionError);
}

}
