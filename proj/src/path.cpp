#include "mixtwin/path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mixtwin {

Path::Path(std::vector<Point2> waypoints, bool closed)
    : points_(std::move(waypoints)), closed_(closed) {
  if (points_.size() < 2) throw std::invalid_argument("path needs at least two waypoints");
  const std::size_t segments = segment_count();
  cumulative_.resize(segments + 1, 0.0);
  for (std::size_t i = 0; i < segments; ++i) {
    const Point2 a = segment_start(i);
    const Point2 b = segment_end(i);
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (!(len > 0.0)) throw std::invalid_argument("path has a zero-length segment");
    cumulative_[i + 1] = cumulative_[i] + len;
  }
  length_ = cumulative_.back();
}

Path Path::oval(Point2 center, double straight_length, double radius, double max_spacing) {
  if (!(straight_length > 0.0) || !(radius > 0.0) || !(max_spacing > 0.0)) {
    throw std::invalid_argument("oval dimensions must be positive");
  }
  std::vector<Point2> pts;
  const double half = straight_length / 2.0;
  const auto straight_steps =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(straight_length / max_spacing)));
  const auto arc_steps = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::ceil(std::numbers::pi * radius / max_spacing)));

  // Lower straight, left to right.
  for (std::size_t i = 0; i < straight_steps; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(straight_steps);
    pts.push_back({center.x - half + u * straight_length, center.y - radius});
  }
  // Right semicircle, bottom to top.
  for (std::size_t i = 0; i < arc_steps; ++i) {
    const double a = -std::numbers::pi / 2.0 +
                     std::numbers::pi * static_cast<double>(i) / static_cast<double>(arc_steps);
    pts.push_back({center.x + half + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
  // Upper straight, right to left.
  for (std::size_t i = 0; i < straight_steps; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(straight_steps);
    pts.push_back({center.x + half - u * straight_length, center.y + radius});
  }
  // Left semicircle, top to bottom.
  for (std::size_t i = 0; i < arc_steps; ++i) {
    const double a = std::numbers::pi / 2.0 +
                     std::numbers::pi * static_cast<double>(i) / static_cast<double>(arc_steps);
    pts.push_back({center.x - half + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
  return Path(std::move(pts), true);
}

Path Path::line(Point2 from, Point2 to) { return Path({from, to}, false); }

std::size_t Path::segment_count() const {
  return closed_ ? points_.size() : points_.size() - 1;
}

double Path::wrap(double s) const {
  if (!closed_) return std::clamp(s, 0.0, length_);
  double w = std::fmod(s, length_);
  if (w < 0.0) w += length_;
  return w;
}

double Path::forward_distance(double s_from, double s_to) const {
  if (!closed_) return s_to - s_from;
  return wrap(s_to - s_from);
}

std::size_t Path::segment_at(double s) const {
  const double w = wrap(s);
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), w);
  std::size_t idx = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  return std::min(idx, segment_count() - 1);
}

Point2 Path::point_at(double s) const {
  double w = wrap(s);
  const std::size_t i = segment_at(w);
  const Point2 a = segment_start(i);
  const Point2 b = segment_end(i);
  const double seg_len = cumulative_[i + 1] - cumulative_[i];
  double u = (w - cumulative_[i]) / seg_len;
  if (!closed_) {
    // Open paths extend linearly past their ends.
    if (s < 0.0) u = s / seg_len;
    if (s > length_) u = 1.0 + (s - length_) / seg_len;
  }
  return {a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)};
}

double Path::heading_at(double s) const {
  const std::size_t i = segment_at(s);
  const Point2 a = segment_start(i);
  const Point2 b = segment_end(i);
  return std::atan2(b.y - a.y, b.x - a.x);
}

PathProjection Path::project(Point2 p) const {
  PathProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  const std::size_t segments = segment_count();
  for (std::size_t i = 0; i < segments; ++i) {
    const Point2 a = segment_start(i);
    const Point2 b = segment_end(i);
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double u = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    if (closed_ || (i > 0 && i + 1 < segments)) {
      u = std::clamp(u, 0.0, 1.0);
    } else {
      // Open-path end segments extend so points before/after still project.
      const double lo = (i == 0) ? -std::numeric_limits<double>::infinity() : 0.0;
      const double hi = (i + 1 == segments) ? std::numeric_limits<double>::infinity() : 1.0;
      u = std::clamp(u, lo, hi);
    }
    const double fx = a.x + u * dx;
    const double fy = a.y + u * dy;
    const double d = std::hypot(p.x - fx, p.y - fy);
    if (d < best.distance) {
      const double len = std::sqrt(len2);
      best.distance = d;
      best.s = cumulative_[i] + u * len;
      best.lateral = (dx * (p.y - a.y) - dy * (p.x - a.x)) / len;
      best.segment = i;
    }
  }
  if (closed_) best.s = wrap(best.s);
  return best;
}

}  // namespace mixtwin
