#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdes/geometry.hpp"

namespace crowdes {

enum class AgentKind { kPedestrian = 0, kBicyclist, kSkateboarder, kCar, kCart, kBus };
inline constexpr int kNumAgentKinds = 6;

std::string_view kind_name(AgentKind kind);
// Accepts canonical names, SDD labels (Biker, Skater, ...) and integer indices.
std::optional<AgentKind> parse_kind(std::string_view token);

struct Agent {
  int id = 0;
  AgentKind kind = AgentKind::kPedestrian;
  double pace = 0.0;  // m/s, derived from the trajectory
  int spawn_frame = 0;
  int end_frame = 0;
  std::vector<Vec2> trajectory;  // one point per frame in [spawn_frame, end_frame]

  bool alive_at(int frame) const { return frame >= spawn_frame && frame <= end_frame; }
  const Vec2& position_at(int frame) const { return trajectory[frame - spawn_frame]; }
  const Vec2& start() const { return trajectory.front(); }
  const Vec2& destination() const { return trajectory.back(); }
  int duration_frames() const { return end_frame - spawn_frame + 1; }
  // Mean per-frame displacement times fps.
  void recompute_pace(double fps);
};

struct Scenario {
  double fps = 5.0;
  int total_frames = 0;
  std::string scene_id;
  std::vector<Agent> agents;

  int alive_count(int frame) const;
  // Checks the per-agent and per-scenario invariants; throws InputError.
  void validate() const;
  Bounds bounds() const;
};

enum class TrajectoryFormat { kEthUcy, kSdd, kGeneric };
TrajectoryFormat parse_format_tag(std::string_view tag);

struct ParseOptions {
  // Video frame rate of the annotation frame indices (ethucy/sdd). The effective
  // rate is video_fps / frame_step.
  double video_fps = 25.0;
  // Spacing of annotated frame indices; 0 detects it as the gcd of per-agent steps.
  int frame_step = 0;
  // Pixel -> meter conversion: either a uniform scale or a 3x3 homography (row-major).
  double world_scale = 1.0;
  std::optional<std::array<double, 9>> homography;
  std::string scene_id;
  // Per-agent frame differences up to this value are interpolated, larger ones split the track.
  int max_interpolated_gap = 2;
};

Scenario parse_trajectory_file(const std::string& path, TrajectoryFormat format,
                               const ParseOptions& options = {});
Scenario parse_trajectory_text(std::string_view text, TrajectoryFormat format,
                               const ParseOptions& options = {},
                               const std::string& source_name = "<text>");

// `# crowdes-traj v1 fps=<f> scene=<id> frames=<T_V>` then `frame agent_id kind x_m y_m`
// rows sorted by (frame, agent id); coordinates quantized to 1e-4 m.
std::string format_scenario(const Scenario& scenario);
void write_scenario(const std::string& path, const Scenario& scenario);

Scenario resample_fps(const Scenario& scenario, double target_fps = 5.0);

struct Window {
  int start = 0;
  int length = 0;
  std::vector<int> spawned;         // agent indices with spawn_frame in [start, start+length)
  std::vector<int> alive_at_start;  // agent indices alive at frame start-1 (previous frame)
};

std::vector<Window> window_scenario(const Scenario& scenario, int window_frames = 50);

// Keeps frames [0, frames); agents are clipped, fully-removed agents dropped.
Scenario truncate_scenario(const Scenario& scenario, int frames);

}  // namespace crowdes
