#pragma once

#include <span>
#include <vector>

#include "crowdes/raster.hpp"
#include "crowdes/trajectory.hpp"

namespace crowdes {

// Segmentation classes, in raster value order.
enum class SegClass { kBuilding = 0, kStructure, kBush, kGrass, kTree, kSidewalk, kRoad };
inline constexpr int kNumSegClasses = 7;

bool is_navigable(SegClass c);

// The per-scene channel stack that conditions emission and simulation.
struct SceneLayout {
  GridRaster segmentation;     // class index per cell
  GridRaster appearance;       // {0,1}
  GridRaster density;          // [0,1]
  GridRaster traversable;      // {0,1}
  std::vector<double> population_prob;  // P(count = k), k = 0..K-1

  const RasterGeometry& geometry() const { return segmentation.geometry(); }
  // Throws InputError if any channel invariant is violated.
  void validate() const;
};

GridRaster derive_appearance_map(std::span<const Agent> agents, const RasterGeometry& grid);
GridRaster derive_density_map(std::span<const Agent> agents, const RasterGeometry& grid);
std::vector<double> derive_population_prob(const Scenario& scenario, int support_size);
// Observed max concurrent count plus 25%, rounded up, and at least max + 1.
int default_population_support(const Scenario& scenario);
GridRaster derive_traversable_map(const GridRaster& segmentation);

// Binary map of the given positions (previous-frame occupancy).
GridRaster occupancy_map(std::span<const Vec2> positions, const RasterGeometry& grid);

// Grid covering `bounds` plus `margin` meters on every side.
RasterGeometry grid_for_bounds(const Bounds& bounds, double cell_size, double margin);

// Builds every derived channel from a segmentation raster and training trajectories.
SceneLayout derive_layout(const GridRaster& segmentation, const Scenario& scenario,
                          int population_support = 0);

}  // namespace crowdes
