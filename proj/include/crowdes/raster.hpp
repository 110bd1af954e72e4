#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crowdes/geometry.hpp"

namespace crowdes {

struct Cell {
  int x = 0;
  int y = 0;
  constexpr bool operator==(const Cell&) const = default;
};

// Placement of a raster in world space.
struct RasterGeometry {
  int width_cells = 0;
  int height_cells = 0;
  double cell_size = 0.5;
  Vec2 origin;  // world coordinate of the (0,0) corner

  Vec2 extent() const { return {width_cells * cell_size, height_cells * cell_size}; }
  Bounds bounds() const;
  void validate() const;
  bool operator==(const RasterGeometry&) const = default;
};

// Metric-registered 2-D grid of scalars, row-major with y as the row index.
class GridRaster {
 public:
  GridRaster() = default;
  explicit GridRaster(const RasterGeometry& geometry, double fill = 0.0);
  GridRaster(const RasterGeometry& geometry, std::vector<double> values);

  const RasterGeometry& geometry() const { return geometry_; }
  int width() const { return geometry_.width_cells; }
  int height() const { return geometry_.height_cells; }
  double cell_size() const { return geometry_.cell_size; }
  Vec2 origin() const { return geometry_.origin; }
  std::size_t size() const { return values_.size(); }

  bool contains(const Cell& c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width() && c.y < height();
  }
  bool contains(const Vec2& world) const { return contains(world_to_cell(world)); }

  Cell world_to_cell(const Vec2& world) const;
  Vec2 cell_center(const Cell& c) const;

  double at(const Cell& c) const { return values_[index(c)]; }
  double& at(const Cell& c) { return values_[index(c)]; }
  double at(int x, int y) const { return at(Cell{x, y}); }
  double& at(int x, int y) { return at(Cell{x, y}); }
  // Value under a world point, or `fallback` outside the raster.
  double sample(const Vec2& world, double fallback) const;

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double max_value() const;
  double sum() const;

  bool operator==(const GridRaster&) const = default;

 private:
  std::size_t index(const Cell& c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width()) +
           static_cast<std::size_t>(c.x);
  }

  RasterGeometry geometry_;
  std::vector<double> values_;
};

// 8-bit binary PGM (P5). Pixel (col, row) maps to cell (x=col, y=row); the
// geometry (cell size, origin) is not stored in the file and comes from the caller.
GridRaster read_pgm(const std::string& path, double cell_size, Vec2 origin);
// Values are rounded and clamped to [0, 255].
void write_pgm(const std::string& path, const GridRaster& raster);

// Plain-text grid: header `width height cell_size origin_x origin_y`, then
// `height` lines of `width` space-separated values.
GridRaster read_text_grid(const std::string& path);
void write_text_grid(const std::string& path, const GridRaster& raster);

}  // namespace crowdes
