#pragma once

#include <cstdint>

#include "crowdes/geometry.hpp"
#include "crowdes/raster.hpp"
#include "crowdes/trajectory.hpp"

namespace crowdes::testing {

struct Fixture {
  Scenario scenario;
  GridRaster segmentation;
};

// 32 x 10 m corridor walled along both long sides; agents enter at the left edge and
// walk straight to the right edge at about 1 m/s.
Fixture corridor_fixture(std::uint64_t seed, int frames = 3000);
// Left-edge spawn band of the corridor, dilated by one cell.
bool in_corridor_spawn_zone(const Vec2& p);

// 20 x 20 m open plaza with two perpendicular streams meeting in the middle; ground truth
// avoids collisions through ORCA steering.
Fixture crossing_fixture(std::uint64_t seed, int frames = 2500);

// Random scenario of `agents` straight walkers inside [0,w] x [0,h].
Scenario random_scenario(std::uint64_t seed, int agents, int frames, double w = 20.0, double h = 20.0);

}  // namespace crowdes::testing
