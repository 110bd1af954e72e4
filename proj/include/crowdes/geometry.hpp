#pragma once

#include <cmath>
#include <vector>

namespace crowdes {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }
constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
// z-component of the 3-D cross product.
constexpr double det(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }
constexpr double norm_sq(const Vec2& v) { return v.x * v.x + v.y * v.y; }
inline double distance(const Vec2& a, const Vec2& b) { return norm(a - b); }
inline Vec2 normalized(const Vec2& v) {
  const double n = norm(v);
  return n > 0.0 ? v / n : Vec2{};
}
inline Vec2 rotate(const Vec2& v, double cos_a, double sin_a) {
  return {cos_a * v.x - sin_a * v.y, sin_a * v.x + cos_a * v.y};
}

using Polyline = std::vector<Vec2>;

double polyline_length(const Polyline& line);

// Axis-aligned bounding box. Empty when min > max.
struct Bounds {
  Vec2 min{1e300, 1e300};
  Vec2 max{-1e300, -1e300};

  bool empty() const { return min.x > max.x || min.y > max.y; }
  void extend(const Vec2& p);
  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
};

// World frame -> canonical frame: p' = R(-theta) (p - origin) / scale.
// The canonical frame puts `origin` at (0,0) and the reference direction on +x.
struct SimilarityTransform {
  Vec2 origin;
  double cos_theta = 1.0;
  double sin_theta = 0.0;
  double scale = 1.0;

  Vec2 to_canonical(const Vec2& world) const;
  Vec2 to_world(const Vec2& canonical) const;
  // Rotation only (no translation/scale), for directions and velocities.
  Vec2 rotate_to_canonical(const Vec2& v) const;
  Vec2 rotate_to_world(const Vec2& v) const;
};

}  // namespace crowdes
