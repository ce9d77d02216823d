#pragma once

#include <map>
#include <span>

#include "mixtwin/entity.hpp"

namespace mixtwin {

inline constexpr double kDefaultStalenessLimit = 0.5;  // s

struct FusionPolicy {
  std::map<Source, double> weights{
      {Source::Onboard, 0.3}, {Source::Roadside, 0.4}, {Source::Native, 0.3}};
  double staleness_limit = kDefaultStalenessLimit;

  // Throws std::invalid_argument on weights outside [0,1], a sum off 1 by
  // more than 1e-9, or a non-positive staleness limit.
  void validate() const;
  double weight(Source source) const;
};

/// Forward prediction under constant turn rate and constant speed. Speed is
/// then advanced by accel * dt and clamped at zero.
/// Throws CompensationError when dt < 0 or dt > staleness_limit.
MixedEntityState extrapolate_state(const MixedEntityState& state, double dt,
                                   double staleness_limit = kDefaultStalenessLimit);

/// Aligns every fresh observation of one entity to `t_now` and blends them by
/// source weight. Headings are averaged as unit vectors. If every fresh
/// observation carries zero weight, they are blended equally, so a {1, 0}
/// priority policy still falls back to the lower-priority source.
/// Throws FusionError on an empty list, mixed ids, or only stale data.
MixedEntityState fuse_observations(std::span<const MixedEntityState> observations,
                                   const FusionPolicy& policy, double t_now);

}  // namespace mixtwin
