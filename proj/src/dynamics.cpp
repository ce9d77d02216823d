#include "mixtwin/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "mixtwin/entity.hpp"

namespace mixtwin {

namespace {

bool all_finite(std::initializer_list<double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

BicycleState bicycle_step(const BicycleState& s, double target_speed, double steer, double dt,
                          double accel_limit) {
  if (!all_finite({s.x, s.y, s.heading, s.speed, s.wheelbase, target_speed, steer, dt,
                   accel_limit})) {
    throw std::invalid_argument("bicycle_step: non-finite input");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("bicycle_step: dt must be positive");
  if (!(std::abs(steer) < kPi / 2.0)) throw std::invalid_argument("bicycle_step: |steer| >= pi/2");
  if (!(s.wheelbase > 0.0)) throw std::invalid_argument("bicycle_step: wheelbase must be positive");
  if (accel_limit < 0.0) throw std::invalid_argument("bicycle_step: negative accel limit");

  const double v0 = std::max(0.0, s.speed);
  const double target = std::max(0.0, target_speed);
  const double max_dv = accel_limit * dt;
  const double v1 = std::max(0.0, v0 + std::clamp(target - v0, -max_dv, max_dv));

  BicycleState out = s;
  out.yaw_rate = v0 * std::tan(steer) / s.wheelbase;
  const double dtheta = out.yaw_rate * dt;
  if (std::abs(dtheta) < 1e-9) {
    out.x = s.x + v0 * std::cos(s.heading + 0.5 * dtheta) * dt;
    out.y = s.y + v0 * std::sin(s.heading + 0.5 * dtheta) * dt;
  } else {
    const double r = v0 / out.yaw_rate;
    out.x = s.x + r * (std::sin(s.heading + dtheta) - std::sin(s.heading));
    out.y = s.y + r * (std::cos(s.heading) - std::cos(s.heading + dtheta));
  }
  out.heading = normalize_angle(s.heading + dtheta);
  out.speed = v1;
  out.accel = (v1 - v0) / dt;
  return out;
}

void CaccParams::validate() const {
  if (!(standstill_gap > 0.0 && time_gap > 0.0 && gap_gain > 0.0 && speed_gain > 0.0)) {
    throw std::invalid_argument("CACC gains and spacing must be positive");
  }
  if (!(feedforward_gain >= 0.0 && feedforward_gain <= 1.0)) {
    throw std::invalid_argument("CACC feedforward gain outside [0,1]");
  }
  if (!(accel_min < 0.0 && accel_max > 0.0)) {
    throw std::invalid_argument("CACC acceleration bounds must straddle zero");
  }
}

double cacc_longitudinal(double gap, double own_speed, double pred_speed, double pred_accel,
                         const CaccParams& p) {
  if (std::isnan(gap) || gap == -std::numeric_limits<double>::infinity() ||
      !all_finite({own_speed, pred_speed, pred_accel})) {
    throw std::invalid_argument("cacc_longitudinal: non-finite input");
  }
  double a = 0.0;
  if (std::isinf(gap)) {
    a = p.speed_gain * (p.cruise_speed - own_speed);
  } else {
    a = p.gap_gain * (gap - cacc_desired_gap(own_speed, p)) +
        p.speed_gain * (pred_speed - own_speed) + p.feedforward_gain * pred_accel;
  }
  return std::clamp(a, p.accel_min, p.accel_max);
}

double scheduled_lookahead(double speed, const LateralParams& p) {
  const double raw = p.reference_speed > 0.0 ? p.lookahead * speed / p.reference_speed : p.lookahead;
  return std::clamp(raw, p.lookahead_min, p.lookahead_max);
}

LateralCommand preview_lateral(const BicycleState& s, const Path& path, double lookahead,
                               const LateralParams& params) {
  if (!(lookahead > 0.0)) throw std::invalid_argument("preview_lateral: lookahead must be positive");
  if (path.waypoints().size() < 2) throw std::invalid_argument("preview_lateral: path too short");
  if (!all_finite({s.x, s.y, s.heading})) throw std::invalid_argument("preview_lateral: non-finite pose");

  const Point2 pos{s.x, s.y};
  const PathProjection proj = path.project(pos);

  // Walk forward from the foot point for the first outward crossing of the
  // lookahead circle.
  std::optional<Point2> target;
  if (proj.distance <= lookahead) {
    double s_cursor = proj.s;
    const double search_limit = proj.s + lookahead + proj.distance + 1.0;
    const double step = 0.25;
    Point2 prev = path.point_at(s_cursor);
    while (s_cursor < search_limit + step) {
      const double s_next = s_cursor + step;
      if (!path.closed() && s_cursor >= path.length()) break;
      const Point2 next = path.point_at(s_next);
      const double d_next = std::hypot(next.x - pos.x, next.y - pos.y);
      if (d_next >= lookahead) {
        // Solve |prev + u (next - prev) - pos| = lookahead on this chord.
        const double dx = next.x - prev.x;
        const double dy = next.y - prev.y;
        const double fx = prev.x - pos.x;
        const double fy = prev.y - pos.y;
        const double a = dx * dx + dy * dy;
        const double b = 2.0 * (fx * dx + fy * dy);
        const double c = fx * fx + fy * fy - lookahead * lookahead;
        const double disc = std::max(0.0, b * b - 4.0 * a * c);
        const double u = std::clamp((-b + std::sqrt(disc)) / (2.0 * a), 0.0, 1.0);
        target = Point2{prev.x + u * dx, prev.y + u * dy};
        break;
      }
      prev = next;
      s_cursor = s_next;
    }
  }
  if (!target) target = path.point_at(proj.s + lookahead);

  const double alpha = normalize_angle(std::atan2(target->y - s.y, target->x - s.x) - s.heading);
  const double raw = std::atan(2.0 * s.wheelbase * std::sin(alpha) / lookahead);
  LateralCommand cmd;
  cmd.steer = std::clamp(raw, -params.steer_max, params.steer_max);
  cmd.off_path = proj.distance > params.off_path_threshold;
  cmd.lookahead = lookahead;
  return cmd;
}

void HdvParams::validate() const {
  if (!(reaction_delay >= 0.0 && sensitivity > 0.0 && relative_speed_gain >= 0.0)) {
    throw std::invalid_argument("HDV parameters require tau >= 0, alpha > 0, beta >= 0");
  }
  if (!(free_speed > 0.0 && gap_range > 0.0)) {
    throw std::invalid_argument("HDV optimal-velocity curve requires v_free > 0 and s1 > 0");
  }
  if (!(accel_min < 0.0 && accel_max > 0.0)) {
    throw std::invalid_argument("HDV acceleration bounds must straddle zero");
  }
}

double optimal_velocity(double gap, const HdvParams& p) {
  return p.free_speed * std::clamp((gap - p.gap_offset) / p.gap_range, 0.0, 1.0);
}

double hdv_equilibrium_gap(double speed, const HdvParams& p) {
  return p.gap_offset + p.gap_range * std::clamp(speed / p.free_speed, 0.0, 1.0);
}

void HdvHistory::push(const HdvSample& sample) {
  if (!samples_.empty() && sample.t < samples_.back().t) {
    throw std::invalid_argument("HDV history must be pushed in time order");
  }
  samples_.push_back(sample);
}

HdvSample HdvHistory::at(double t_query, bool& warm_up) const {
  if (samples_.empty()) throw std::logic_error("HDV history is empty");
  constexpr double kEps = 1e-9;
  warm_up = false;
  if (samples_.front().t > t_query + kEps) {
    warm_up = true;
    return samples_.front();
  }
  auto it = std::upper_bound(samples_.begin(), samples_.end(), t_query + kEps,
                             [](double t, const HdvSample& s) { return t < s.t; });
  return *std::prev(it);
}

void HdvHistory::trim(double t_now, double horizon) {
  const double keep_from = t_now - horizon;
  while (samples_.size() > 1 && samples_[1].t <= keep_from) samples_.pop_front();
}

HdvCommand hdv_step(double t, double gap, double own_speed, double pred_speed, HdvHistory& history,
                    const HdvParams& p) {
  if (!all_finite({t, own_speed, pred_speed}) || std::isnan(gap)) {
    throw std::invalid_argument("hdv_step: non-finite input");
  }
  history.push({t, gap, own_speed, pred_speed});
  HdvCommand cmd;
  const HdvSample d = history.at(t - p.reaction_delay, cmd.warm_up);
  const double a = p.sensitivity * (optimal_velocity(d.gap, p) - d.own_speed) +
                   p.relative_speed_gain * (d.pred_speed - d.own_speed);
  cmd.accel = std::clamp(a, p.accel_min, p.accel_max);
  history.trim(t, p.reaction_delay + 1.0);
  return cmd;
}

void SpeedProfile::validate() const {
  switch (kind) {
    case ProfileKind::SuddenBrake:
      if (!(floor_speed >= 0.0 && deceleration > 0.0 && hold_duration >= 0.0 &&
            recovery_duration >= 0.0)) {
        throw std::invalid_argument("sudden-brake parameters must be nonnegative");
      }
      break;
    case ProfileKind::Sinusoid:
      if (!(amplitude >= 0.0 && frequency >= 0.0) || !std::isfinite(amplitude) ||
          !std::isfinite(frequency)) {
        throw std::invalid_argument("sinusoid amplitude and frequency must be nonnegative");
      }
      break;
    case ProfileKind::HandDrawn:
      if (samples.empty()) throw std::invalid_argument("hand-drawn profile has no samples");
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].second < 0.0 || !std::isfinite(samples[i].second)) {
          throw std::invalid_argument("hand-drawn speeds must be nonnegative");
        }
        if (i > 0 && !(samples[i].first > samples[i - 1].first)) {
          throw std::invalid_argument("hand-drawn sample times must increase");
        }
      }
      break;
  }
  if (!std::isfinite(t0) || t0 < 0.0) throw std::invalid_argument("profile activation time invalid");
}

double SpeedProfile::end_time(double base_speed) const {
  switch (kind) {
    case ProfileKind::SuddenBrake: {
      const double ramp = std::max(0.0, base_speed - floor_speed) / deceleration;
      return t0 + ramp + hold_duration + recovery_duration;
    }
    case ProfileKind::Sinusoid:
      return std::numeric_limits<double>::infinity();
    case ProfileKind::HandDrawn:
      return t0 + samples.back().first;
  }
  return t0;
}

SpeedProfile SpeedProfile::scaled(double factor) const {
  SpeedProfile out = *this;
  out.floor_speed *= factor;
  out.deceleration *= factor;
  out.amplitude *= factor;
  for (auto& [t, v] : out.samples) v *= factor;
  return out;
}

SpeedProfile sudden_brake_profile(double t0) {
  SpeedProfile p;
  p.kind = ProfileKind::SuddenBrake;
  p.t0 = t0;
  return p;
}

SpeedProfile sinusoid_profile(double t0, double amplitude, double frequency) {
  SpeedProfile p;
  p.kind = ProfileKind::Sinusoid;
  p.t0 = t0;
  p.amplitude = amplitude;
  p.frequency = frequency;
  return p;
}

double evaluate_profile(const SpeedProfile& p, double t, double base_speed) {
  if (t < p.t0) return base_speed;
  const double r = t - p.t0;
  switch (p.kind) {
    case ProfileKind::SuddenBrake: {
      const double floor = std::min(p.floor_speed, base_speed);
      const double ramp = (base_speed - floor) / p.deceleration;
      if (r < ramp) return base_speed - p.deceleration * r;
      const double after_ramp = r - ramp;
      if (after_ramp < p.hold_duration) return floor;
      const double after_hold = after_ramp - p.hold_duration;
      if (after_hold < p.recovery_duration) {
        if (p.recovery == RecoveryMode::WaitThenStep) return floor;
        return floor + (base_speed - floor) * after_hold / p.recovery_duration;
      }
      return base_speed;
    }
    case ProfileKind::Sinusoid:
      return std::max(0.0, base_speed + p.amplitude * std::sin(2.0 * kPi * p.frequency * r));
    case ProfileKind::HandDrawn: {
      const auto& s = p.samples;
      if (r <= s.front().first) return s.front().second;
      if (r >= s.back().first) return s.back().second;
      auto it = std::upper_bound(s.begin(), s.end(), r,
                                 [](double v, const auto& e) { return v < e.first; });
      const auto& hi = *it;
      const auto& lo = *std::prev(it);
      const double u = (r - lo.first) / (hi.first - lo.first);
      return lo.second + u * (hi.second - lo.second);
    }
  }
  return base_speed;
}

}  // namespace mixtwin
