#include "crowdes/nav_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "crowdes/error.hpp"

namespace crowdes {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

}  // namespace

NavGraph::NavGraph(GridRaster traversable) : traversable_(std::move(traversable)) {}

std::vector<NavEdge> NavGraph::neighbors(const Cell& c) const {
  std::vector<NavEdge> out;
  const double cs = traversable_.cell_size();
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const Cell n{c.x + dx, c.y + dy};
      if (!traversable(n)) continue;
      if (dx != 0 && dy != 0) {
        if (!traversable(Cell{c.x + dx, c.y}) || !traversable(Cell{c.x, c.y + dy})) continue;
        out.push_back({n, kSqrt2 * cs});
      } else {
        out.push_back({n, cs});
      }
    }
  }
  return out;
}

std::optional<Cell> NavGraph::snap(const Vec2& p, int radius_cells) const {
  const Cell center = traversable_.world_to_cell(p);
  std::optional<Cell> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int dy = -radius_cells; dy <= radius_cells; ++dy) {
    for (int dx = -radius_cells; dx <= radius_cells; ++dx) {
      const Cell c{center.x + dx, center.y + dy};
      if (!traversable(c)) continue;
      const double d = distance(traversable_.cell_center(c), p);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
  }
  return best;
}

std::optional<Vec2> NavGraph::project(const Vec2& p, double radius_m) const {
  if (traversable(p)) return p;
  const int radius_cells = static_cast<int>(std::ceil(radius_m / traversable_.cell_size()));
  const Cell center = traversable_.world_to_cell(p);
  std::optional<Vec2> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int dy = -radius_cells; dy <= radius_cells; ++dy) {
    for (int dx = -radius_cells; dx <= radius_cells; ++dx) {
      const Cell c{center.x + dx, center.y + dy};
      if (!traversable(c)) continue;
      const Vec2 q = traversable_.cell_center(c);
      const double d = distance(q, p);
      if (d <= radius_m && d < best_d) {
        best_d = d;
        best = q;
      }
    }
  }
  return best;
}

std::vector<Cell> NavGraph::supercover(const Vec2& a, const Vec2& b) const {
  const double cs = traversable_.cell_size();
  const Vec2 la = (a - traversable_.origin()) / cs;
  const Vec2 lb = (b - traversable_.origin()) / cs;
  Cell c{static_cast<int>(std::floor(la.x)), static_cast<int>(std::floor(la.y))};
  const Cell end{static_cast<int>(std::floor(lb.x)), static_cast<int>(std::floor(lb.y))};
  std::vector<Cell> cells{c};
  const Vec2 d = lb - la;
  const int step_x = d.x > 0 ? 1 : (d.x < 0 ? -1 : 0);
  const int step_y = d.y > 0 ? 1 : (d.y < 0 ? -1 : 0);
  const double inf = std::numeric_limits<double>::infinity();
  const double t_delta_x = step_x != 0 ? 1.0 / std::abs(d.x) : inf;
  const double t_delta_y = step_y != 0 ? 1.0 / std::abs(d.y) : inf;
  double t_max_x = step_x > 0 ? (std::floor(la.x) + 1 - la.x) * t_delta_x
                   : step_x < 0 ? (la.x - std::floor(la.x)) * t_delta_x
                                : inf;
  double t_max_y = step_y > 0 ? (std::floor(la.y) + 1 - la.y) * t_delta_y
                   : step_y < 0 ? (la.y - std::floor(la.y)) * t_delta_y
                                : inf;
  const int max_steps = std::abs(end.x - c.x) + std::abs(end.y - c.y) + 2;
  for (int i = 0; i < max_steps && !(c == end); ++i) {
    constexpr double kTie = 1e-12;
    if (std::abs(t_max_x - t_max_y) <= kTie) {
      if (t_max_x > 1.0) break;
      // Exact corner crossing: include both side cells.
      cells.push_back({c.x + step_x, c.y});
      cells.push_back({c.x, c.y + step_y});
      c.x += step_x;
      c.y += step_y;
      t_max_x += t_delta_x;
      t_max_y += t_delta_y;
    } else if (t_max_x < t_max_y) {
      if (t_max_x > 1.0) break;
      c.x += step_x;
      t_max_x += t_delta_x;
    } else {
      if (t_max_y > 1.0) break;
      c.y += step_y;
      t_max_y += t_delta_y;
    }
    cells.push_back(c);
  }
  return cells;
}

bool NavGraph::line_of_sight(const Vec2& a, const Vec2& b) const {
  for (const Cell& c : supercover(a, b)) {
    if (!traversable(c)) return false;
  }
  return true;
}

namespace {

std::vector<Cell> astar(const NavGraph& graph, const Cell& start, const Cell& goal) {
  const GridRaster& r = graph.raster();
  const int w = r.width();
  const auto idx = [w](const Cell& c) { return static_cast<std::size_t>(c.y) * w + c.x; };
  const double cs = r.cell_size();
  const auto heuristic = [&](const Cell& c) {
    const double dx = std::abs(c.x - goal.x), dy = std::abs(c.y - goal.y);
    return cs * ((dx + dy) + (kSqrt2 - 2.0) * std::min(dx, dy));
  };
  std::vector<double> g(r.size(), std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> parent(r.size(), -1);
  std::vector<char> closed(r.size(), 0);
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  g[idx(start)] = 0.0;
  open.push({heuristic(start), idx(start)});
  while (!open.empty()) {
    const auto [f, i] = open.top();
    open.pop();
    if (closed[i]) continue;
    closed[i] = 1;
    const Cell c{static_cast<int>(i % w), static_cast<int>(i / w)};
    if (c == goal) break;
    for (const NavEdge& e : graph.neighbors(c)) {
      const std::size_t j = idx(e.to);
      if (closed[j]) continue;
      const double ng = g[i] + e.length;
      if (ng < g[j]) {
        g[j] = ng;
        parent[j] = static_cast<std::int64_t>(i);
        open.push({ng + heuristic(e.to), j});
      }
    }
  }
  if (!closed[idx(goal)]) return {};
  std::vector<Cell> cells;
  for (std::int64_t i = static_cast<std::int64_t>(idx(goal)); i >= 0; i = parent[i]) {
    cells.push_back({static_cast<int>(i % w), static_cast<int>(i / w)});
  }
  std::reverse(cells.begin(), cells.end());
  return cells;
}

}  // namespace

Polyline shortest_path(const NavGraph& graph, const Vec2& from, const Vec2& to,
                       const PathOptions& options) {
  if (from == to) return {from};
  const auto start = graph.snap(from, options.snap_radius_cells);
  const auto goal = graph.snap(to, options.snap_radius_cells);
  if (!start || !goal) throw NoPathError("path endpoint is not within the snapping radius of walkable space");
  const std::vector<Cell> cells = astar(graph, *start, *goal);
  if (cells.empty()) throw NoPathError("path endpoints lie in disconnected walkable regions");

  Polyline raw{from};
  for (std::size_t i = 1; i + 1 < cells.size(); ++i) raw.push_back(graph.raster().cell_center(cells[i]));
  raw.push_back(to);
  if (!options.smooth || raw.size() <= 2) return raw;

  // Segments touching an endpoint may start in the snapped (non-walkable) cell.
  const Cell from_cell = graph.raster().world_to_cell(from);
  const Cell to_cell = graph.raster().world_to_cell(to);
  const auto visible = [&](const Vec2& a, const Vec2& b) {
    for (const Cell& c : graph.supercover(a, b)) {
      if (!graph.traversable(c) && !(c == from_cell) && !(c == to_cell)) return false;
    }
    return true;
  };
  Polyline smoothed{raw.front()};
  std::size_t i = 0;
  while (i + 1 < raw.size()) {
    std::size_t j = raw.size() - 1;
    while (j > i + 1 && !visible(raw[i], raw[j])) --j;
    smoothed.push_back(raw[j]);
    i = j;
  }
  return smoothed;
}

double project_arc_length(const Polyline& path, const Vec2& p) {
  double best_s = 0.0;
  double best_d = std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Vec2 seg = path[i + 1] - path[i];
    const double len_sq = norm_sq(seg);
    const double t = len_sq > 0.0 ? std::clamp(dot(p - path[i], seg) / len_sq, 0.0, 1.0) : 0.0;
    const double d = distance(path[i] + seg * t, p);
    const double len = std::sqrt(len_sq);
    if (d < best_d) {
      best_d = d;
      best_s = s + t * len;
    }
    s += len;
  }
  return best_s;
}

Vec2 point_at_arc_length(const Polyline& path, double s) {
  if (path.empty()) throw InputError("empty path");
  if (s <= 0.0) return path.front();
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double len = distance(path[i], path[i + 1]);
    if (s <= len && len > 0.0) return path[i] + (path[i + 1] - path[i]) * (s / len);
    s -= len;
  }
  return path.back();
}

Vec2 control_point(const Polyline& path, const Vec2& current, double pace, double horizon) {
  if (path.empty()) throw InputError("control point requested on an empty path");
  const double s0 = project_arc_length(path, current);
  return point_at_arc_length(path, s0 + std::max(pace * horizon, 0.0));
}

}  // namespace crowdes
