#pragma once

#include <span>
#include <vector>

#include "crowdes/emitter.hpp"
#include "crowdes/geometry.hpp"
#include "crowdes/nav_mesh.hpp"
#include "crowdes/rng.hpp"
#include "crowdes/scene_layout.hpp"
#include "crowdes/simulator.hpp"
#include "crowdes/trajectory.hpp"

namespace crowdes {

struct OrcaAgent {
  Vec2 position;
  Vec2 velocity;
  Vec2 pref_velocity;
  double radius = 0.2;
  double max_speed = 1.5;
};

struct OrcaOptions {
  double time_horizon = 2.0;
  double time_step = 0.2;
  double neighbor_dist = 10.0;
  double safety_margin = 0.01;  // added to the combined radius when building half-planes
};

// Half-plane {v : det(direction, v - point) >= 0} of permitted velocities.
struct OrcaLine {
  Vec2 point;
  Vec2 direction;
};

// One reciprocal half-plane per neighbor within neighbor_dist.
std::vector<OrcaLine> orca_lines(const OrcaAgent& agent, std::span<const OrcaAgent> neighbors,
                                 const OrcaOptions& options);

// Velocity closest to the preferred velocity inside every half-plane and the max-speed
// disc; when infeasible, the velocity minimizing the largest violation.
Vec2 orca_velocity(const OrcaAgent& agent, std::span<const OrcaAgent> neighbors, const OrcaOptions& options = {});

// Steers every live agent toward its control point with ORCA, one frame at a time.
WindowReport orca_step_window(SimState& state, const NavGraph& graph, const SimulatorConfig& config,
                              const OrcaOptions& options, int window_start, int window);

struct SeOrcaConfig {
  int window = 50;
  bool warmup = true;
  SimulatorConfig sim;  // fps, horizon, departure rules
  OrcaOptions orca;
};

// Surface emitter (appearance-weighted histogram_emit) plus ORCA steering.
Scenario se_orca_generate(const SceneLayout& layout, const NavGraph& graph, const AgentPrior& prior,
                          std::span<const double> population_prob, int duration, const SeOrcaConfig& config,
                          std::uint64_t seed, const std::string& scene_id = "");

}  // namespace crowdes
