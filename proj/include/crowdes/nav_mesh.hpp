#pragma once

#include <optional>
#include <vector>

#include "crowdes/geometry.hpp"
#include "crowdes/raster.hpp"

namespace crowdes {

struct NavEdge {
  Cell to;
  double length = 0.0;
};

// 8-connected grid graph over the traversable cells of a binary raster.
// Diagonal moves require both orthogonally adjacent cells to be traversable.
class NavGraph {
 public:
  NavGraph() = default;
  explicit NavGraph(GridRaster traversable);

  const GridRaster& raster() const { return traversable_; }
  bool traversable(const Cell& c) const { return traversable_.contains(c) && traversable_.at(c) > 0.5; }
  bool traversable(const Vec2& p) const { return traversable(traversable_.world_to_cell(p)); }
  std::vector<NavEdge> neighbors(const Cell& c) const;

  // Nearest traversable cell within `radius_cells` (Chebyshev) of p, by distance to
  // the cell center; ties go to the lower (y, x).
  std::optional<Cell> snap(const Vec2& p, int radius_cells) const;
  // Nearest traversable point within `radius_m`: p itself when already traversable.
  std::optional<Vec2> project(const Vec2& p, double radius_m) const;

  // Cells touched by the segment, including both cells at exact corner crossings.
  std::vector<Cell> supercover(const Vec2& a, const Vec2& b) const;
  bool line_of_sight(const Vec2& a, const Vec2& b) const;

 private:
  GridRaster traversable_;
};

struct PathOptions {
  int snap_radius_cells = 2;
  bool smooth = true;
};

// A* over the grid graph followed by greedy line-of-sight smoothing. The result
// starts at `from` and ends at `to`. Throws NoPathError when the endpoints cannot
// be snapped or lie in disconnected components.
Polyline shortest_path(const NavGraph& graph, const Vec2& from, const Vec2& to,
                       const PathOptions& options = {});

// Point at arc length pace*horizon beyond the projection of `current` onto `path`,
// clamped to the final vertex.
Vec2 control_point(const Polyline& path, const Vec2& current, double pace, double horizon);

// Arc-length position of the closest point on `path` to `p`.
double project_arc_length(const Polyline& path, const Vec2& p);
Vec2 point_at_arc_length(const Polyline& path, double s);

}  // namespace crowdes
