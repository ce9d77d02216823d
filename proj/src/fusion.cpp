#include "mixtwin/fusion.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mixtwin/errors.hpp"

namespace mixtwin {

namespace {

// Below this turn rate the straight-line limit of the arc formula is used.
constexpr double kStraightYawRate = 1e-9;

}  // namespace

void FusionPolicy::validate() const {
  double sum = 0.0;
  for (const auto& [source, w] : weights) {
    if (!(w >= 0.0 && w <= 1.0)) {
      throw std::invalid_argument("fusion weight for " + std::string(to_string(source)) +
                                  " outside [0,1]");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("fusion weights must sum to 1");
  }
  if (!(staleness_limit > 0.0)) {
    throw std::invalid_argument("staleness limit must be positive");
  }
}

double FusionPolicy::weight(Source source) const {
  auto it = weights.find(source);
  return it == weights.end() ? 0.0 : it->second;
}

MixedEntityState extrapolate_state(const MixedEntityState& s, double dt,
                                   double staleness_limit) {
  if (!(dt >= 0.0) || dt > staleness_limit) {
    throw CompensationError("compensation interval " + std::to_string(dt) +
                            " s outside [0, staleness limit]");
  }
  MixedEntityState out = s;
  if (dt == 0.0) return out;

  const double heading_end = s.heading + s.yaw_rate * dt;
  if (std::abs(s.yaw_rate) < kStraightYawRate) {
    out.x = s.x + s.speed * std::cos(s.heading) * dt;
    out.y = s.y + s.speed * std::sin(s.heading) * dt;
  } else {
    const double radius = s.speed / s.yaw_rate;
    out.x = s.x + radius * (std::sin(heading_end) - std::sin(s.heading));
    out.y = s.y - radius * (std::cos(heading_end) - std::cos(s.heading));
  }
  out.heading = normalize_angle(heading_end);
  out.speed = std::max(0.0, s.speed + s.accel * dt);
  out.t = s.t + dt;
  return out;
}

MixedEntityState fuse_observations(std::span<const MixedEntityState> observations,
                                   const FusionPolicy& policy, double t_now) {
  if (observations.empty()) throw FusionError("no observations to fuse");
  const EntityId id = observations.front().id;

  std::vector<MixedEntityState> aligned;
  std::vector<double> weights;
  aligned.reserve(observations.size());
  for (const auto& obs : observations) {
    if (obs.id != id) throw FusionError("observations refer to different entities");
    const double age = t_now - obs.t;
    if (age < 0.0 || age > policy.staleness_limit) continue;
    aligned.push_back(extrapolate_state(obs, age, policy.staleness_limit));
    weights.push_back(policy.weight(obs.source));
  }
  if (aligned.empty()) {
    throw FusionError("all observations of " + to_string(id) + " are stale");
  }

  double total = 0.0;
  for (double w : weights) total += w;
  if (total <= 0.0) {
    for (double& w : weights) w = 1.0;
    total = static_cast<double>(weights.size());
  }

  MixedEntityState out;
  out.id = id;
  out.t = t_now;
  double sin_sum = 0.0;
  double cos_sum = 0.0;
  double best_weight = -1.0;
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    const double w = weights[i] / total;
    const auto& a = aligned[i];
    out.x += w * a.x;
    out.y += w * a.y;
    out.speed += w * a.speed;
    out.yaw_rate += w * a.yaw_rate;
    out.accel += w * a.accel;
    sin_sum += w * std::sin(a.heading);
    cos_sum += w * std::cos(a.heading);
    if (weights[i] > best_weight ||
        (weights[i] == best_weight && a.source < out.source)) {
      best_weight = weights[i];
      out.source = a.source;
    }
  }
  // Identical inputs are returned exactly; averaging would perturb the last bit.
  bool all_equal = true;
  for (const auto& a : aligned) {
    if (a.x != aligned.front().x || a.y != aligned.front().y ||
        a.speed != aligned.front().speed || a.heading != aligned.front().heading ||
        a.yaw_rate != aligned.front().yaw_rate || a.accel != aligned.front().accel) {
      all_equal = false;
      break;
    }
  }
  if (all_equal) {
    const Source source = out.source;
    out = aligned.front();
    out.source = source;
    out.t = t_now;
    return out;
  }
  out.heading = normalize_angle(std::atan2(sin_sum, cos_sum));
  out.speed = std::max(0.0, out.speed);
  return out;
}

}  // namespace mixtwin
