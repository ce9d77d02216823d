#include <doctest.h>

#include <cmath>

#include "mixtwin/entity_sim.hpp"
#include "mixtwin/errors.hpp"

using namespace mixtwin;

namespace {

VehicleProcessConfig physical(int n = 1) {
  VehicleProcessConfig c;
  c.id = {EntityKind::PhysicalVehicle, n};
  c.realm = Realm::EmulatedPhysical;
  return c;
}

NativeCommand speed_cmd(const EntityId& id, double v, double t) { return {id, t, SetTargetSpeed{v}}; }

}  // namespace

TEST_SUITE("entity_sim") {

TEST_CASE("realm names and transforms") {
  CHECK(parse_realm("ExternalVirtual") == Realm::ExternalVirtual);
  CHECK_FALSE(parse_realm("Hologram"));
  CHECK(realm_transform(Realm::EmulatedPhysical).scale == doctest::Approx(14.0));
  CHECK(realm_transform(Realm::Virtual).scale == 1.0);
}

TEST_CASE("command state applies profiles over the base speed and drops them after they end") {
  CommandState s;
  s.apply(SetTargetSpeed{2.8});
  CHECK(s.target_speed(0.0) == 2.8);
  s.apply(SetSpeedProfile{sudden_brake_profile(1.0)});
  CHECK(s.has_profile());
  CHECK(s.target_speed(2.0) < 2.8);
  CHECK(s.target_speed(100.0) == doctest::Approx(2.8));
  CHECK_FALSE(s.has_profile());
  s.apply(SetSteering{0.1});
  CHECK(s.steer() == 0.1);
  s.apply(BoardByte{0x26});
  CHECK(s.base_speed() == 2.8);
}

TEST_CASE("an emulated physical vehicle converges to a native speed command") {
  VehicleProcess v(physical(), BicycleState{}, Rng(3));
  v.receive(speed_cmd(v.id(), 0.2, 0.0), 0.0);
  std::optional<NativeState> last;
  for (int k = 1; k <= 250; ++k) {
    auto r = v.step(k * 0.02, 0.02, nullptr);
    if (r) last = r;
  }
  REQUIRE(last);
  CHECK(last->source == Source::Onboard);
  CHECK(std::abs(last->speed - 0.2) <= 0.005);
  CHECK(v.truth().speed == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(v.truth().speed * v.transform().scale == doctest::Approx(2.8).epsilon(1e-6));
}

TEST_CASE("actuation lag delays the command by the configured time") {
  VehicleProcess v(physical(), BicycleState{}, Rng(3));
  v.receive(speed_cmd(v.id(), 0.2, 0.0), 0.0);
  v.step(0.02, 0.02, nullptr);
  CHECK(v.truth().speed == 0.0);
  v.step(0.04, 0.02, nullptr);
  CHECK(v.truth().speed > 0.0);

  VehicleProcessConfig c;
  c.id = {EntityKind::VirtualVehicle, 2};
  VehicleProcess w(c, BicycleState{}, Rng(3));
  w.receive(speed_cmd(w.id(), 1.0, 0.0), 0.0);
  w.step(0.02, 0.02, nullptr);
  CHECK(w.truth().speed > 0.0);
}

TEST_CASE("virtual vehicles report exact state every tick") {
  VehicleProcessConfig c;
  c.id = {EntityKind::VirtualVehicle, 2};
  BicycleState init;
  init.speed = 2.8;
  VehicleProcess v(c, init, Rng(1));
  for (int k = 1; k <= 5; ++k) {
    auto r = v.step(k * 0.02, 0.02, nullptr);
    REQUIRE(r);
    CHECK(r->x == v.truth().x);
    CHECK(r->source == Source::Native);
  }
}

TEST_CASE("command loss raises one fail-safe event and holds the last command") {
  EventLog log;
  BicycleState init;
  init.speed = 0.2;
  VehicleProcess v(physical(), init, Rng(1));
  v.receive(speed_cmd(v.id(), 0.2, 0.0), 0.0);
  for (int k = 1; k <= 100; ++k) v.step(k * 0.02, 0.02, &log);
  CHECK(v.fail_safe_active());
  REQUIRE(log.events().size() == 1);
  CHECK(log.events()[0].type == "fail_safe_hold");
  CHECK(log.events()[0].t == doctest::Approx(1.02));
  CHECK(v.truth().speed == doctest::Approx(0.2));
  v.receive(speed_cmd(v.id(), 0.2, 2.0), 2.0);
  CHECK_FALSE(v.fail_safe_active());
}

TEST_CASE("brake-on-loss option stops the vehicle") {
  auto c = physical();
  c.brake_on_command_loss = true;
  BicycleState init;
  init.speed = 0.2;
  VehicleProcess v(c, init, Rng(1));
  for (int k = 1; k <= 200; ++k) v.step(k * 0.02, 0.02, nullptr);
  CHECK(v.truth().speed == doctest::Approx(0.0));
}

TEST_CASE("command log holds native units only") {
  VehicleProcess v(physical(), BicycleState{}, Rng(1));
  v.receive(speed_cmd(v.id(), 0.2, 0.0), 0.0);
  REQUIRE(v.command_log().size() == 1);
  CHECK(std::get<SetTargetSpeed>(v.command_log()[0].body).speed == 0.2);
}

TEST_CASE("freeze stops the vehicle in place") {
  BicycleState init;
  init.speed = 2.8;
  VehicleProcessConfig c;
  c.id = {EntityKind::VirtualVehicle, 3};
  VehicleProcess v(c, init, Rng(1));
  v.step(0.02, 0.02, nullptr);
  v.freeze();
  const double x = v.truth().x;
  v.receive(speed_cmd(v.id(), 2.8, 0.04), 0.04);
  v.step(0.04, 0.02, nullptr);
  CHECK(v.frozen());
  CHECK(v.truth().x == x);
  CHECK(v.truth().speed == 0.0);
}

TEST_CASE("process hosts reject external and non-vehicle entities") {
  VehicleProcessConfig c;
  c.id = {EntityKind::VirtualVehicle, 8};
  c.realm = Realm::ExternalVirtual;
  CHECK_THROWS_AS(VehicleProcess(c, BicycleState{}, Rng(1)), std::invalid_argument);
  c.realm = Realm::Virtual;
  c.id = {EntityKind::BarrierGate, 0};
  CHECK_THROWS_AS(VehicleProcess(c, BicycleState{}, Rng(1)), std::invalid_argument);
}

TEST_CASE("roadside unit opens the gate after its travel time") {
  RsuProcess rsu(ChannelMap::default_layout(), 1.0);
  const auto cmd = encode_frame(FacilityFrame{FacilityFrame::Direction::Command, 0.0, {0x26}});
  CHECK(rsu.handle_line(cmd, 0.0) == BoardReply::Ack);
  auto status_at = [&](double t) {
    const auto f = std::get<FacilityFrame>(decode_frame(rsu.poll(t)));
    return parse_status_frame(f.bytes);
  };
  CHECK_FALSE(status_at(0.5).test(39));
  CHECK(status_at(1.0).test(39));
  CHECK(rsu.handle_line(encode_frame(FacilityFrame{FacilityFrame::Direction::Command, 2.0, {0xFF}}), 2.0) ==
        BoardReply::Nack);
  CHECK(rsu.nacks() == 1);
  CHECK_THROWS_AS(rsu.handle_line(rsu.poll(2.0), 2.0), ProtocolError);
}

TEST_CASE("external client streams only after its registration is acknowledged") {
  const EntityId id{EntityKind::VirtualVehicle, 8};
  BicycleState init;
  init.speed = 2.8;
  ExternalVehicleClient ext(id, init, 3.0);
  CHECK(std::holds_alternative<RegisterFrame>(decode_frame(ext.register_line())));
  CHECK_FALSE(ext.step(0.02, 0.02));
  CHECK(ext.truth().x > 0.0);

  ext.on_line("not json", 0.02);
  CHECK(ext.protocol_errors() == 1);
  ext.on_line(encode_frame(EventFrame{{0.02, "registered", "VirtualVehicle#7", "", 0.0}}), 0.02);
  CHECK_FALSE(ext.registered());
  ext.on_line(encode_frame(EventFrame{{0.02, "registered", to_string(id), "", 0.0}}), 0.02);
  CHECK(ext.registered());

  const auto line = ext.step(0.04, 0.02);
  REQUIRE(line);
  const auto su = std::get<StateUpdateFrame>(decode_frame(*line));
  CHECK(su.state.id == id);
  CHECK(su.state.t == 0.04);

  ext.on_line(encode_frame(CommandFrame{{id, 0.04, SetTargetSpeed{0.0}}}), 0.04);
  for (int k = 3; k < 200; ++k) ext.step(k * 0.02, 0.02);
  CHECK(ext.truth().speed == doctest::Approx(0.0));
}

}
