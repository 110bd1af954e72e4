#pragma once

#include <string>

#include "crowdes/scene_layout.hpp"
#include "crowdes/trajectory.hpp"

namespace crowdes {

struct RenderOptions {
  double pixels_per_meter = 10.0;
  bool markers = true;
};

// Layout underlay (one rect per segmentation cell), one <polyline> per agent colored
// by kind, and spawn/goal circles.
std::string render_svg(const Scenario& scenario, const SceneLayout& layout, const RenderOptions& options = {});

}  // namespace crowdes
