#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mixtwin/dynamics.hpp"
#include "mixtwin/entity.hpp"

using namespace mixtwin;

TEST_SUITE("dynamics") {

TEST_CASE("bicycle at rest stays put") {
  BicycleState s;
  s.x = 4.0;
  s.heading = 0.3;
  const auto n = bicycle_step(s, 0.0, 0.2, 0.02, 3.0);
  CHECK(n.x == 4.0);
  CHECK(n.y == 0.0);
  CHECK(n.heading == 0.3);
}

TEST_CASE("bicycle at 2.8 m/s straight advances 0.056 m per tick") {
  BicycleState s;
  s.speed = 2.8;
  const auto n = bicycle_step(s, 2.8, 0.0, 0.02, 3.0);
  CHECK(n.x == doctest::Approx(0.056).epsilon(1e-12));
  CHECK(n.speed == doctest::Approx(2.8));
}

TEST_CASE("constant steer traces the analytic turning circle") {
  BicycleState s;
  s.speed = 2.8;
  const double r = 2.66 / std::tan(0.1);
  CHECK(r == doctest::Approx(26.51).epsilon(1e-3));
  // Center is r to the left of a vehicle heading +x from the origin.
  double worst = 0.0;
  for (int i = 0; i < 3000; ++i) {
    s = bicycle_step(s, 2.8, 0.1, 0.02, 3.0);
    worst = std::max(worst, std::abs(std::hypot(s.x, s.y - r) - r) / r);
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("speed slews at the acceleration limit") {
  BicycleState s;
  s = bicycle_step(s, 2.8, 0.0, 0.02, 3.0);
  CHECK(s.speed == doctest::Approx(0.06));
  CHECK(s.accel == doctest::Approx(3.0));
  CHECK_THROWS(bicycle_step(s, 1.0, kPi / 2, 0.02, 3.0));
  CHECK_THROWS(bicycle_step(s, 1.0, 0.0, 0.0, 3.0));
  CHECK_THROWS(bicycle_step(s, NAN, 0.0, 0.02, 3.0));
}

TEST_CASE("CACC equilibrium gives zero acceleration") {
  const CaccParams p;
  CHECK(cacc_longitudinal(cacc_desired_gap(2.8, p), 2.8, 2.8, 0.0, p) == doctest::Approx(0.0));
  CHECK(cacc_desired_gap(2.8, p) == doctest::Approx(6.68));
}

TEST_CASE("CACC plug-in: +2 m, +0.5 m/s, pred accel 0.1 gives 1.125") {
  const CaccParams p;
  const double v = 2.0;
  const double a = cacc_longitudinal(cacc_desired_gap(v, p) + 2.0, v, v + 0.5, 0.1, p);
  CHECK(a == doctest::Approx(1.125));
}

TEST_CASE("CACC clamps to the braking bound") {
  const CaccParams p;
  CHECK(cacc_longitudinal(cacc_desired_gap(2.8, p) - 20.0, 2.8, 2.8, 0.0, p) == doctest::Approx(-2.5));
  CHECK(cacc_longitudinal(1e6, 0.0, 10.0, 3.0, p) == doctest::Approx(2.0));
}

TEST_CASE("CACC with no predecessor cruises") {
  const CaccParams p;
  CHECK(cacc_longitudinal(INFINITY, 2.0, 0.0, 0.0, p) == doctest::Approx(0.25 * 0.8));
  CHECK_THROWS(cacc_longitudinal(NAN, 2.0, 0.0, 0.0, p));
}

TEST_CASE("CACC parameter domain") {
  CaccParams p;
  p.feedforward_gain = 1.5;
  CHECK_THROWS(p.validate());
  p = {};
  p.time_gap = 0.0;
  CHECK_THROWS(p.validate());
  p = {};
  p.accel_min = 0.5;
  CHECK_THROWS(p.validate());
}

TEST_CASE("lookahead schedule: 5 m at 2.8 m/s, clamped to [2, 12]") {
  const LateralParams p;
  CHECK(scheduled_lookahead(2.8, p) == doctest::Approx(5.0));
  CHECK(scheduled_lookahead(0.1, p) == doctest::Approx(2.0));
  CHECK(scheduled_lookahead(20.0, p) == doctest::Approx(12.0));
}

TEST_CASE("pure pursuit on a straight aligned path steers zero") {
  const Path line = Path::line({0, 0}, {100, 0});
  BicycleState s;
  s.x = 10.0;
  CHECK(preview_lateral(s, line, 5.0).steer == doctest::Approx(0.0));
}

TEST_CASE("pure pursuit with 0.5 m offset matches the geometric oracle") {
  const Path line = Path::line({0, 0}, {100, 0});
  BicycleState s;
  s.x = 10.0;
  s.y = -0.5;
  const double alpha = std::atan(0.5 / std::sqrt(25.0 - 0.25));
  const double oracle = std::atan(2.0 * 2.66 * std::sin(alpha) / 5.0);
  CHECK(oracle == doctest::Approx(0.106).epsilon(0.01));
  const auto cmd = preview_lateral(s, line, 5.0);
  CHECK(cmd.steer == doctest::Approx(oracle).epsilon(1e-9));
  CHECK_FALSE(cmd.off_path);
  s.y = 0.5;
  CHECK(preview_lateral(s, line, 5.0).steer == doctest::Approx(-oracle).epsilon(1e-9));
}

TEST_CASE("pure pursuit converges on a circle with steer near atan(L/R)") {
  const double R = 25.0;
  const Path circle = Path::oval({0, 0}, 1e-6, R, 0.1);
  BicycleState s;
  s.x = 0.0;
  s.y = -R + 0.4;
  s.speed = 2.8;
  double steer = 0.0;
  for (int i = 0; i < 5000; ++i) {
    steer = preview_lateral(s, circle, scheduled_lookahead(s.speed, {})).steer;
    s = bicycle_step(s, 2.8, steer, 0.02, 3.0);
  }
  CHECK(steer == doctest::Approx(std::atan(2.66 / R)).epsilon(0.05));
  CHECK(std::abs(circle.project({s.x, s.y}).lateral) < 0.1);
}

TEST_CASE("far from the path the target falls back along the path and flags off-path") {
  const Path line = Path::line({0, 0}, {100, 0});
  BicycleState s;
  s.x = 10.0;
  s.y = -8.0;
  const auto cmd = preview_lateral(s, line, 5.0);
  CHECK(cmd.off_path);
  CHECK(cmd.steer > 0.0);
  CHECK(std::abs(cmd.steer) <= LateralParams{}.steer_max + 1e-12);
}

TEST_CASE("HDV at the optimal-velocity equilibrium holds speed") {
  const HdvParams p;
  HdvHistory h;
  const double gap = hdv_equilibrium_gap(2.8, p);
  CHECK(gap == doctest::Approx(6.68));
  CHECK(optimal_velocity(gap, p) == doctest::Approx(2.8));
  HdvCommand cmd;
  for (int k = 0; k <= 100; ++k) cmd = hdv_step(k * 0.02, gap, 2.8, 2.8, h, p);
  CHECK_FALSE(cmd.warm_up);
  CHECK(cmd.accel == doctest::Approx(0.0));
}

TEST_CASE("HDV responds exactly one reaction delay after a predecessor step") {
  const HdvParams p;
  HdvHistory h;
  const double dt = 0.02;
  const double gap = hdv_equilibrium_gap(2.8, p);
  double onset = -1.0;
  for (int k = 0; k <= 200; ++k) {
    const double t = k * dt;
    const double pred = t >= 1.0 - 1e-9 ? 2.0 : 2.8;
    const auto cmd = hdv_step(t, gap, 2.8, pred, h, p);
    if (onset < 0.0 && std::abs(cmd.accel) > 1e-12) onset = t;
  }
  CHECK(onset == doctest::Approx(1.0 + p.reaction_delay).epsilon(1e-9));
}

TEST_CASE("HDV step response overshoots") {
  const HdvParams p;
  HdvHistory h;
  const double dt = 0.02;
  double v = 2.0;
  double gap = hdv_equilibrium_gap(2.0, p);
  double peak = v;
  for (int k = 0; k < 3000; ++k) {
    const double t = k * dt;
    const double pred = t >= 2.0 ? 2.8 : 2.0;
    const auto cmd = hdv_step(t, gap, v, pred, h, p);
    gap += (pred - v) * dt;
    v = std::max(0.0, v + cmd.accel * dt);
    peak = std::max(peak, v);
  }
  CHECK(v == doctest::Approx(2.8).epsilon(0.01));
  CHECK(peak - 2.8 > 0.0);
}

TEST_CASE("HDV history rejects time travel") {
  HdvHistory h;
  h.push({1.0, 5.0, 1.0, 1.0});
  CHECK_THROWS(h.push({0.5, 5.0, 1.0, 1.0}));
  bool warm = false;
  CHECK(h.at(0.0, warm).t == 1.0);
  CHECK(warm);
}

TEST_CASE("brake profile phases") {
  const auto p = sudden_brake_profile(30.0);
  CHECK(p.floor_speed == doctest::Approx(0.2806).epsilon(1e-3));
  CHECK(evaluate_profile(p, 10.0, 2.8) == doctest::Approx(2.8));
  CHECK(evaluate_profile(p, 30.0 + 4.499, 2.8) == doctest::Approx(2.8 - 0.28 * 4.499));
  CHECK(evaluate_profile(p, 30.0 + 4.499, 2.8) == doctest::Approx(1.540).epsilon(1e-3));
  const double ramp = (2.8 - p.floor_speed) / 0.28;
  CHECK(ramp == doctest::Approx(8.998).epsilon(1e-3));
  CHECK(evaluate_profile(p, 30.0 + ramp + 10.0, 2.8) == doctest::Approx(p.floor_speed));
  CHECK(evaluate_profile(p, 30.0 + ramp + 20.0 + 6.0, 2.8) ==
        doctest::Approx(p.floor_speed + 0.5 * (2.8 - p.floor_speed)));
  CHECK(evaluate_profile(p, 30.0 + 8.998 + 20 + 12 + 1e-6, 2.8) == doctest::Approx(2.8));
  CHECK(p.end_time(2.8) == doctest::Approx(30.0 + ramp + 32.0));
}

TEST_CASE("wait-then-step recovery jumps back at the end") {
  auto p = sudden_brake_profile(0.0);
  p.recovery = RecoveryMode::WaitThenStep;
  const double ramp = (2.8 - p.floor_speed) / 0.28;
  CHECK(evaluate_profile(p, ramp + 25.0, 2.8) == doctest::Approx(p.floor_speed));
  CHECK(evaluate_profile(p, ramp + 32.0 + 1e-6, 2.8) == doctest::Approx(2.8));
}

TEST_CASE("sinusoid and hand-drawn profiles") {
  const auto s = sinusoid_profile(10.0, 0.3, 0.2);
  CHECK(evaluate_profile(s, 10.0 + 1.25, 2.8) == doctest::Approx(3.1));
  CHECK(std::isinf(s.end_time(2.8)));
  SpeedProfile h;
  h.kind = ProfileKind::HandDrawn;
  h.t0 = 5.0;
  h.samples = {{0.0, 2.8}, {2.0, 1.8}, {4.0, 2.8}};
  CHECK(evaluate_profile(h, 6.0, 2.8) == doctest::Approx(2.3));
  CHECK(evaluate_profile(h, 100.0, 2.8) == doctest::Approx(2.8));
  h.samples = {{0.0, 2.8}, {0.0, 1.0}};
  CHECK_THROWS(h.validate());
}

TEST_CASE("profiles scale to native units") {
  const auto p = sudden_brake_profile(30.0).scaled(1.0 / 14.0);
  CHECK(p.floor_speed == doctest::Approx(0.2806 / 14.0).epsilon(1e-3));
  CHECK(p.deceleration == doctest::Approx(0.02));
  CHECK(p.hold_duration == 20.0);
  CHECK(evaluate_profile(p, 31.0, 0.2) * 14.0 ==
        doctest::Approx(evaluate_profile(sudden_brake_profile(30.0), 31.0, 2.8)));
}

}
