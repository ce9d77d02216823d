#include "mixtwin/frame.hpp"

#include <cmath>

#include "mixtwin/errors.hpp"

namespace mixtwin {

namespace {

void check_transform(const FrameTransform& f) {
  if (!(f.scale > 0.0) || !std::isfinite(f.scale) || !std::isfinite(f.offset_x) ||
      !std::isfinite(f.offset_y) || !std::isfinite(f.rotation)) {
    throw FrameConversionError("frame transform requires finite parameters and scale > 0");
  }
}

template <class Frame>
void check_state(const EntityStateIn<Frame>& s) {
  for (double v : {s.t, s.x, s.y, s.heading, s.speed, s.yaw_rate, s.accel}) {
    if (!std::isfinite(v)) {
      throw FrameConversionError("non-finite field in state of " + to_string(s.id));
    }
  }
}

}  // namespace

MixedEntityState to_mixed_frame(const NativeState& s, const FrameTransform& f) {
  check_transform(f);
  check_state(s);
  const double c = std::cos(f.rotation);
  const double sn = std::sin(f.rotation);
  const double px = f.scale * s.x;
  const double py = f.scale * s.y;
  MixedEntityState out;
  out.id = s.id;
  out.t = s.t;
  out.x = c * px - sn * py + f.offset_x;
  out.y = sn * px + c * py + f.offset_y;
  out.heading = normalize_angle(s.heading + f.rotation);
  out.speed = s.speed * f.scale;
  out.yaw_rate = s.yaw_rate;
  out.accel = s.accel * f.scale;
  out.source = s.source;
  return out;
}

NativeState from_mixed_frame(const MixedEntityState& s, const FrameTransform& f) {
  check_transform(f);
  check_state(s);
  const double c = std::cos(f.rotation);
  const double sn = std::sin(f.rotation);
  const double dx = s.x - f.offset_x;
  const double dy = s.y - f.offset_y;
  NativeState out;
  out.id = s.id;
  out.t = s.t;
  out.x = (c * dx + sn * dy) / f.scale;
  out.y = (-sn * dx + c * dy) / f.scale;
  out.heading = normalize_angle(s.heading - f.rotation);
  out.speed = s.speed / f.scale;
  out.yaw_rate = s.yaw_rate;
  out.accel = s.accel / f.scale;
  out.source = s.source;
  return out;
}

double speed_to_native(double mixed_speed, const FrameTransform& f) {
  check_transform(f);
  if (!std::isfinite(mixed_speed)) throw FrameConversionError("non-finite speed");
  return mixed_speed / f.scale;
}

double speed_to_mixed(double native_speed, const FrameTransform& f) {
  check_transform(f);
  if (!std::isfinite(native_speed)) throw FrameConversionError("non-finite speed");
  return native_speed * f.scale;
}

}  // namespace mixtwin
