#include "crowdes/scene_layout.hpp"

#include <algorithm>
#include <cmath>

#include "crowdes/error.hpp"

namespace crowdes {

namespace {

Cell checked_cell(const GridRaster& raster, const Agent& agent, const Vec2& p) {
  const Cell c = raster.world_to_cell(p);
  if (!raster.contains(c)) {
    throw OutOfBoundsError("agent " + std::to_string(agent.id) + " coordinate (" +
                           std::to_string(p.x) + ", " + std::to_string(p.y) +
                           ") lies outside the raster");
  }
  return c;
}

}  // namespace

bool is_navigable(SegClass c) {
  return c != SegClass::kBuilding && c != SegClass::kStructure && c != SegClass::kBush;
}

void SceneLayout::validate() const {
  for (double v : segmentation.values()) {
    if (v != std::floor(v) || v < 0 || v >= kNumSegClasses) {
      throw InputError("segmentation class index outside 0..6");
    }
  }
  for (const GridRaster* binary : {&appearance, &traversable}) {
    for (double v : binary->values()) {
      if (v != 0.0 && v != 1.0) throw InputError("binary layout channel holds a non-binary value");
    }
  }
  for (double v : density.values()) {
    if (v < 0.0 || v > 1.0) throw InputError("density value outside [0,1]");
  }
  double total = 0.0;
  for (double p : population_prob) {
    if (p < 0.0) throw InputError("negative population probability");
    total += p;
  }
  if (population_prob.empty() || std::abs(total - 1.0) > 1e-9) {
    throw InputError("population probabilities must sum to 1");
  }
}

GridRaster derive_appearance_map(std::span<const Agent> agents, const RasterGeometry& grid) {
  GridRaster map(grid, 0.0);
  for (const Agent& a : agents) {
    if (a.trajectory.empty()) throw InputError("agent " + std::to_string(a.id) + " has no coordinates");
    map.at(checked_cell(map, a, a.start())) = 1.0;
    map.at(checked_cell(map, a, a.destination())) = 1.0;
  }
  return map;
}

GridRaster derive_density_map(std::span<const Agent> agents, const RasterGeometry& grid) {
  GridRaster counts(grid, 0.0);
  for (const Agent& a : agents) {
    for (const Vec2& p : a.trajectory) counts.at(checked_cell(counts, a, p)) += 1.0;
  }
  for (double& v : counts.values()) v = std::log1p(v);
  const double peak = counts.max_value();
  if (peak > 0.0) {
    for (double& v : counts.values()) v /= peak;
  }
  return counts;
}

std::vector<double> derive_population_prob(const Scenario& scenario, int support_size) {
  std::vector<int> per_frame(static_cast<std::size_t>(std::max(scenario.total_frames, 0)), 0);
  for (const Agent& a : scenario.agents) {
    for (int f = a.spawn_frame; f <= a.end_frame; ++f) {
      if (f >= 0 && f < scenario.total_frames) ++per_frame[f];
    }
  }
  const int observed_max = per_frame.empty() ? 0 : *std::max_element(per_frame.begin(), per_frame.end());
  if (support_size <= observed_max) {
    throw InputError("population support K=" + std::to_string(support_size) +
                     " must exceed the observed maximum " + std::to_string(observed_max));
  }
  std::vector<double> prob(static_cast<std::size_t>(support_size), 0.0);
  if (per_frame.empty()) {
    prob[0] = 1.0;
    return prob;
  }
  for (int n : per_frame) prob[n] += 1.0;
  for (double& p : prob) p /= static_cast<double>(per_frame.size());
  return prob;
}

int default_population_support(const Scenario& scenario) {
  int observed_max = 0;
  for (int f = 0; f < scenario.total_frames; ++f) observed_max = std::max(observed_max, scenario.alive_count(f));
  const int scaled = static_cast<int>(std::ceil(observed_max * 1.25));
  return std::max(scaled, observed_max + 1);
}

GridRaster derive_traversable_map(const GridRaster& segmentation) {
  GridRaster out(segmentation.geometry(), 0.0);
  for (std::size_t i = 0; i < segmentation.size(); ++i) {
    const double v = segmentation.values()[i];
    if (v != std::floor(v) || v < 0 || v >= kNumSegClasses) {
      throw InputError("segmentation holds unknown class index " + std::to_string(v));
    }
    out.values()[i] = is_navigable(static_cast<SegClass>(static_cast<int>(v))) ? 1.0 : 0.0;
  }
  return out;
}

GridRaster occupancy_map(std::span<const Vec2> positions, const RasterGeometry& grid) {
  GridRaster map(grid, 0.0);
  for (const Vec2& p : positions) {
    const Cell c = map.world_to_cell(p);
    if (map.contains(c)) map.at(c) = 1.0;
  }
  return map;
}

RasterGeometry grid_for_bounds(const Bounds& bounds, double cell_size, double margin) {
  if (bounds.empty()) throw InputError("cannot build a grid for empty bounds");
  RasterGeometry g;
  g.cell_size = cell_size;
  g.origin = bounds.min - Vec2{margin, margin};
  g.width_cells = static_cast<int>(std::ceil((bounds.width() + 2 * margin) / cell_size)) + 1;
  g.height_cells = static_cast<int>(std::ceil((bounds.height() + 2 * margin) / cell_size)) + 1;
  return g;
}

SceneLayout derive_layout(const GridRaster& segmentation, const Scenario& scenario,
                          int population_support) {
  SceneLayout layout;
  layout.segmentation = segmentation;
  layout.traversable = derive_traversable_map(segmentation);
  layout.appearance = derive_appearance_map(scenario.agents, segmentation.geometry());
  layout.density = derive_density_map(scenario.agents, segmentation.geometry());
  const int k = population_support > 0 ? population_support : default_population_support(scenario);
  layout.population_prob = derive_population_prob(scenario, k);
  layout.validate();
  return layout;
}

}  // namespace crowdes
