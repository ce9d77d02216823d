#pragma once

#include "mixtwin/entity.hpp"

namespace mixtwin {

/// Similarity transform from a native testbed frame into the mixed space:
/// p_mixed = R(rotation) * (scale * p_native) + offset.
/// Speeds and accelerations scale with `scale`; headings rotate; yaw rates
/// and timestamps are unchanged.
struct FrameTransform {
  double scale = 1.0;
  double offset_x = 0.0;
  double offset_y = 0.0;
  double rotation = 0.0;

  static FrameTransform identity() { return {}; }
  static FrameTransform scaled(double scale) { return {scale, 0.0, 0.0, 0.0}; }

  bool operator==(const FrameTransform&) const = default;
};

// 1:14 scaled sand table.
inline constexpr double kPhysicalTestbedScale = 14.0;

MixedEntityState to_mixed_frame(const NativeState& state, const FrameTransform& transform);
NativeState from_mixed_frame(const MixedEntityState& state, const FrameTransform& transform);

double speed_to_native(double mixed_speed, const FrameTransform& transform);
double speed_to_mixed(double native_speed, const FrameTransform& transform);

}  // namespace mixtwin
