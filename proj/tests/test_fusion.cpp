#include <doctest.h>

#include <cmath>
#include <vector>

#include "mixtwin/errors.hpp"
#include "mixtwin/fusion.hpp"

using namespace mixtwin;

namespace {

MixedEntityState obs(double t, double x, Source src, double speed = 2.8, double heading = 0.0) {
  MixedEntityState s;
  s.id = {EntityKind::PhysicalVehicle, 1};
  s.t = t;
  s.x = x;
  s.speed = speed;
  s.heading = heading;
  s.source = src;
  return s;
}

FusionPolicy halves() {
  FusionPolicy p;
  p.weights = {{Source::Onboard, 0.5}, {Source::Roadside, 0.5}, {Source::Native, 0.0}};
  return p;
}

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("extrapolation by zero is the identity") {
  const auto s = obs(1.0, 3.0, Source::Onboard);
  const auto e = extrapolate_state(s, 0.0);
  CHECK(e.x == s.x);
  CHECK(e.y == s.y);
  CHECK(e.t == s.t);
}

TEST_CASE("straight-line extrapolation: 2.8 m/s for 0.1 s moves 0.28 m") {
  const auto e = extrapolate_state(obs(0.0, 0.0, Source::Onboard), 0.1);
  CHECK(e.x == doctest::Approx(0.28).epsilon(1e-12));
  CHECK(e.y == doctest::Approx(0.0));
  CHECK(e.t == doctest::Approx(0.1));
}

TEST_CASE("turning extrapolation matches the circular arc") {
  auto s = obs(0.0, 1.0, Source::Onboard, 2.8, 0.3);
  s.y = -2.0;
  s.yaw_rate = 0.5;
  const double dt = 0.02;
  const auto e = extrapolate_state(s, dt);
  const double r = 2.8 / 0.5;
  const double x = 1.0 + r * (std::sin(0.3 + 0.5 * dt) - std::sin(0.3));
  const double y = -2.0 + r * (std::cos(0.3) - std::cos(0.3 + 0.5 * dt));
  CHECK(std::abs(e.x - x) < 1e-9);
  CHECK(std::abs(e.y - y) < 1e-9);
  CHECK(e.heading == doctest::Approx(0.31));
}

TEST_CASE("extrapolation applies acceleration and never reverses") {
  auto s = obs(0.0, 0.0, Source::Onboard, 0.1);
  s.accel = -2.0;
  CHECK(extrapolate_state(s, 0.2).speed == 0.0);
  s.accel = 1.0;
  CHECK(extrapolate_state(s, 0.2).speed == doctest::Approx(0.3));
}

TEST_CASE("extrapolation outside [0, staleness] fails") {
  const auto s = obs(0.0, 0.0, Source::Onboard);
  CHECK_THROWS_AS(extrapolate_state(s, -0.01), CompensationError);
  CHECK_THROWS_AS(extrapolate_state(s, 0.51), CompensationError);
}

TEST_CASE("single fresh observation is extrapolated to now") {
  const std::vector<MixedEntityState> one{obs(0.95, 10.0, Source::Roadside)};
  const auto f = fuse_observations(one, FusionPolicy{}, 1.0);
  CHECK(f.x == doctest::Approx(10.14));
  CHECK(f.t == doctest::Approx(1.0));
}

TEST_CASE("two aligned observations at 10 and 12 average to 11") {
  const std::vector<MixedEntityState> two{obs(1.0, 10.0, Source::Onboard), obs(1.0, 12.0, Source::Roadside)};
  CHECK(fuse_observations(two, halves(), 1.0).x == doctest::Approx(11.0));
}

TEST_CASE("onboard aged 50 ms plus fresh roadside fuse to 10.145") {
  const std::vector<MixedEntityState> two{obs(0.95, 10.0, Source::Onboard), obs(1.0, 10.15, Source::Roadside)};
  CHECK(fuse_observations(two, halves(), 1.0).x == doctest::Approx(10.145).epsilon(1e-12));
}

TEST_CASE("default weights 0.3 / 0.4 / 0.3") {
  const std::vector<MixedEntityState> three{obs(1.0, 0.0, Source::Onboard), obs(1.0, 10.0, Source::Roadside),
                                            obs(1.0, 20.0, Source::Native)};
  CHECK(fuse_observations(three, FusionPolicy{}, 1.0).x == doctest::Approx(0.4 * 10.0 + 0.3 * 20.0));
}

TEST_CASE("headings average on the circle") {
  const std::vector<MixedEntityState> two{obs(1.0, 0.0, Source::Onboard, 2.8, kPi - 0.1),
                                          obs(1.0, 0.0, Source::Roadside, 2.8, -kPi + 0.1)};
  CHECK(std::abs(std::abs(fuse_observations(two, halves(), 1.0).heading) - kPi) < 1e-9);
}

TEST_CASE("zero-weight sources still count when they are all that is fresh") {
  FusionPolicy p;
  p.weights = {{Source::Onboard, 1.0}, {Source::Roadside, 0.0}, {Source::Native, 0.0}};
  const std::vector<MixedEntityState> stale_onboard{obs(0.0, 0.0, Source::Onboard), obs(1.0, 7.0, Source::Roadside)};
  CHECK(fuse_observations(stale_onboard, p, 1.0).x == doctest::Approx(7.0));
}

TEST_CASE("stale observations are dropped, all-stale fails") {
  const std::vector<MixedEntityState> mixed{obs(0.3, 0.0, Source::Onboard), obs(1.0, 5.0, Source::Roadside)};
  CHECK(fuse_observations(mixed, halves(), 1.0).x == doctest::Approx(5.0));
  const std::vector<MixedEntityState> stale{obs(0.3, 0.0, Source::Onboard)};
  CHECK_THROWS_AS(fuse_observations(stale, halves(), 1.0), FusionError);
  CHECK_THROWS_AS(fuse_observations({}, halves(), 1.0), FusionError);
  auto other = obs(1.0, 0.0, Source::Roadside);
  other.id.index = 2;
  const std::vector<MixedEntityState> ids{obs(1.0, 0.0, Source::Onboard), other};
  CHECK_THROWS_AS(fuse_observations(ids, halves(), 1.0), FusionError);
}

TEST_CASE("policy validation") {
  FusionPolicy p;
  CHECK_NOTHROW(p.validate());
  p.weights[Source::Native] = 0.31;
  CHECK_THROWS(p.validate());
  p = FusionPolicy{};
  p.staleness_limit = 0.0;
  CHECK_THROWS(p.validate());
  p = FusionPolicy{};
  p.weights = {{Source::Onboard, 1.2}, {Source::Roadside, -0.2}, {Source::Native, 0.0}};
  CHECK_THROWS(p.validate());
}

}
