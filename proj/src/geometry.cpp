#include "crowdes/geometry.hpp"

#include <algorithm>

namespace crowdes {

double polyline_length(const Polyline& line) {
  double total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) total += distance(line[i - 1], line[i]);
  return total;
}

void Bounds::extend(const Vec2& p) {
  min.x = std::min(min.x, p.x);
  min.y = std::min(min.y, p.y);
  max.x = std::max(max.x, p.x);
  max.y = std::max(max.y, p.y);
}

Vec2 SimilarityTransform::to_canonical(const Vec2& world) const {
  return rotate_to_canonical(world - origin) / scale;
}

Vec2 SimilarityTransform::to_world(const Vec2& canonical) const {
  return rotate_to_world(canonical * scale) + origin;
}

Vec2 SimilarityTransform::rotate_to_canonical(const Vec2& v) const {
  return rotate(v, cos_theta, -sin_theta);
}

Vec2 SimilarityTransform::rotate_to_world(const Vec2& v) const {
  return rotate(v, cos_theta, sin_theta);
}

}  // namespace crowdes
