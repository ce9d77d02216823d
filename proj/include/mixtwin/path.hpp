#pragma once

#include <cstddef>
#include <vector>

namespace mixtwin {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct PathProjection {
  double s = 0.0;         // arc length of the foot point
  double distance = 0.0;  // unsigned distance to the path
  double lateral = 0.0;   // signed offset, positive to the left of travel
  std::size_t segment = 0;
};

/// Polyline reference path with cumulative arc length. Closed paths wrap
/// arc length modulo their length.
class Path {
 public:
  Path() = default;
  Path(std::vector<Point2> waypoints, bool closed);

  // Racetrack loop: two straights joined by semicircles, counterclockwise,
  // starting at the left end of the lower straight.
  static Path oval(Point2 center, double straight_length, double radius,
                   double max_spacing = 0.5);
  static Path line(Point2 from, Point2 to);

  double length() const { return length_; }
  bool closed() const { return closed_; }
  const std::vector<Point2>& waypoints() const { return points_; }
  std::size_t segment_count() const;

  PathProjection project(Point2 p) const;
  Point2 point_at(double s) const;
  double heading_at(double s) const;
  // Forward arc distance from s_from to s_to (wrapped on closed paths).
  double forward_distance(double s_from, double s_to) const;
  double wrap(double s) const;

 private:
  std::size_t segment_at(double s) const;
  Point2 segment_start(std::size_t i) const { return points_[i]; }
  Point2 segment_end(std::size_t i) const { return points_[(i + 1) % points_.size()]; }

  std::vector<Point2> points_;
  std::vector<double> cumulative_;  // arc length at each segment start
  double length_ = 0.0;
  bool closed_ = false;
};

}  // namespace mixtwin
