#pragma once

#include <deque>
#include <limits>
#include <vector>

#include "mixtwin/path.hpp"

namespace mixtwin {

// ---------------------------------------------------------------------------
// Kinematic bicycle, rear-axle reference point.

inline constexpr double kDefaultWheelbase = 2.66;  // m, mixed space (0.19 m x 14)

struct BicycleState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double wheelbase = kDefaultWheelbase;
  // Derived over the last step; reported upstream.
  double yaw_rate = 0.0;
  double accel = 0.0;
};

/// Speed moves toward target_speed by at most accel_limit * dt, then the
/// pose advances along the arc at the pre-step speed. Throws std::invalid_argument on
/// non-finite input, dt <= 0 or |steer| >= pi/2.
BicycleState bicycle_step(const BicycleState& state, double target_speed, double steer, double dt,
                          double accel_limit);

// ---------------------------------------------------------------------------
// Longitudinal CACC: constant time gap with predecessor acceleration
// feedforward.

struct CaccParams {
  double standstill_gap = 5.0;    // d0, m
  double time_gap = 0.6;          // h, s
  double gap_gain = 0.45;         // kp, 1/s^2
  double speed_gain = 0.25;       // kd, 1/s
  double feedforward_gain = 1.0;  // kff
  double accel_min = -2.5;        // m/s^2
  double accel_max = 2.0;         // m/s^2
  double cruise_speed = 2.8;      // v_set for a vehicle with no predecessor

  void validate() const;
};

/// gap = +infinity selects cruise mode: kd * (cruise_speed - own_speed).
double cacc_longitudinal(double gap, double own_speed, double pred_speed, double pred_accel,
                         const CaccParams& params);

inline double cacc_desired_gap(double speed, const CaccParams& p) {
  return p.standstill_gap + p.time_gap * speed;
}

// ---------------------------------------------------------------------------
// Pure-pursuit preview steering.

struct LateralParams {
  double lookahead = 5.0;          // m at reference_speed
  double reference_speed = 2.8;    // m/s
  double lookahead_min = 2.0;      // m
  double lookahead_max = 12.0;     // m
  double steer_max = 0.5236;       // rad
  double off_path_threshold = 3.0; // m
};

struct LateralCommand {
  double steer = 0.0;
  bool off_path = false;
  double lookahead = 0.0;
};

/// Lookahead scaled linearly with speed and clamped to [min, max].
double scheduled_lookahead(double speed, const LateralParams& params);

/// Steers toward the path point at Euclidean distance `lookahead` ahead of the
/// vehicle's projection; falls back to the point `lookahead` further along the
/// path when the vehicle is farther than that from the path.
LateralCommand preview_lateral(const BicycleState& state, const Path& path, double lookahead,
                               const LateralParams& params = {});

// ---------------------------------------------------------------------------
// Human-driver surrogate: optimal velocity model with reaction delay.

struct HdvParams {
  double reaction_delay = 0.8;   // tau, s
  double sensitivity = 0.6;      // alpha, 1/s
  double relative_speed_gain = 0.3;  // beta, 1/s
  double free_speed = 4.0;       // v_free, m/s
  double gap_offset = 3.88;      // s0, m
  double gap_range = 4.0;        // s1, m
  double accel_min = -2.5;
  double accel_max = 2.0;

  void validate() const;
};

/// Optimal-velocity curve V(s) = v_free * clamp((s - s0) / s1, 0, 1).
double optimal_velocity(double gap, const HdvParams& params);
/// Gap at which V(gap) = speed (lower end of the linear ramp).
double hdv_equilibrium_gap(double speed, const HdvParams& params);

struct HdvSample {
  double t = 0.0;
  double gap = 0.0;
  double own_speed = 0.0;
  double pred_speed = 0.0;
};

/// Perception history owned by one surrogate driver.
class HdvHistory {
 public:
  void push(const HdvSample& sample);
  // Newest sample with t <= t_query + eps; the oldest sample and warm_up=true
  // when the history does not reach back that far.
  HdvSample at(double t_query, bool& warm_up) const;
  // Drops samples no longer reachable by a query at (t_now - horizon).
  void trim(double t_now, double horizon);
  bool empty() const { return samples_.empty(); }
  std::size_t size() const { return samples_.size(); }

 private:
  std::deque<HdvSample> samples_;
};

struct HdvCommand {
  double accel = 0.0;
  bool warm_up = false;
};

/// Records (t, gap, own_speed, pred_speed) into `history`, then evaluates
/// a = alpha (V(gap_d) - v_d) + beta (pred_d - v_d) on the sample delayed by
/// the reaction time, clamped to the acceleration bounds.
HdvCommand hdv_step(double t, double gap, double own_speed, double pred_speed, HdvHistory& history,
                    const HdvParams& params);

// ---------------------------------------------------------------------------
// Perturbation speed profiles.

enum class ProfileKind { SuddenBrake, Sinusoid, HandDrawn };
enum class RecoveryMode { Ramp, WaitThenStep };

inline constexpr double kKmh = 1.0 / 3.6;  // m/s per km/h

struct SpeedProfile {
  ProfileKind kind = ProfileKind::SuddenBrake;
  double t0 = 0.0;  // activation time, s

  // SuddenBrake: ramp down to floor at `deceleration`, hold, recover.
  double floor_speed = 1.01 * kKmh;  // m/s
  double deceleration = 0.28;        // m/s^2, positive
  double hold_duration = 20.0;       // s
  double recovery_duration = 12.0;   // s
  RecoveryMode recovery = RecoveryMode::Ramp;

  // Sinusoid: base + amplitude * sin(2 pi f (t - t0)).
  double amplitude = 0.0;  // m/s
  double frequency = 0.0;  // Hz

  // HandDrawn: piecewise-linear (seconds after t0, speed) samples.
  std::vector<std::pair<double, double>> samples;

  void validate() const;
  // Activation time plus the span after which the profile returns base speed.
  // Infinite for sinusoids.
  double end_time(double base_speed) const;
  // Same profile with every speed and acceleration multiplied by `factor`.
  SpeedProfile scaled(double factor) const;
};

SpeedProfile sudden_brake_profile(double t0);
SpeedProfile sinusoid_profile(double t0, double amplitude, double frequency);

double evaluate_profile(const SpeedProfile& profile, double t, double base_speed);

}  // namespace mixtwin
