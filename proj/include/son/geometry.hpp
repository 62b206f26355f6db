#pragma once

#include <cmath>

namespace son {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance_sq(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double distance(Point a, Point b) { return std::sqrt(distance_sq(a, b)); }

struct Area {
  double width = 400.0;
  double height = 400.0;
  friend bool operator==(const Area&, const Area&) = default;

  bool contains(Point p) const {
    return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height;
  }
  Point clamp(Point p) const {
    return {std::fmin(std::fmax(p.x, 0.0), width), std::fmin(std::fmax(p.y, 0.0), height)};
  }
  Point center() const { return {0.5 * width, 0.5 * height}; }
};

}  // namespace son
