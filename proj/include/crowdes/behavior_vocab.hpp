#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crowdes/geometry.hpp"
#include "crowdes/nav_mesh.hpp"
#include "crowdes/trajectory.hpp"

namespace crowdes {

enum class ScaleMode {
  kControlDistance,  // divide by |control point - origin|
  kPace,             // divide by pace * horizon
};

struct CanonicalFrameOptions {
  double horizon_s = 4.0;
  ScaleMode scale_mode = ScaleMode::kControlDistance;
};

// Origin at `origin`, +x toward `control`, unit length = distance to `control`.
// Below 1e-6 m the scale is left at 1 and `fallback_heading` (radians) gives the rotation.
SimilarityTransform canonical_transform(const Vec2& origin, const Vec2& control, double pace,
                                        double fallback_heading,
                                        const CanonicalFrameOptions& options = {});

// Heading of the last displacement longer than 1e-6 m in `history`, or 0.
double last_heading(const std::vector<Vec2>& history);

struct MotionSegment {
  std::vector<Vec2> coords;  // T_f canonical points following the origin frame
  SimilarityTransform transform;
  Vec2 control;  // world-space control point used for the transform
  int agent_index = 0;
  int origin_frame = 0;

  std::vector<double> flat() const;
};

struct SegmentOptions {
  int segment_frames = 20;  // T_f
  CanonicalFrameOptions frame;
  bool use_navmesh = true;
};

// Control point for an agent standing at `position` heading to `destination`.
Vec2 navigation_control_point(const NavGraph* graph, const Vec2& position, const Vec2& destination,
                              double pace, double horizon_s, bool use_navmesh);

// Non-overlapping T_f-point segments per agent; the point just before each segment is its
// origin. Tails shorter than T_f are dropped. `graph` may be null (straight-line control).
std::vector<MotionSegment> segment_and_normalize(const Scenario& scenario, const NavGraph* graph,
                                                 const SegmentOptions& options = {});

struct BehaviorVocab {
  int segment_frames = 20;
  std::vector<std::vector<double>> centers;  // B rows of 2*T_f values

  int size() const { return static_cast<int>(centers.size()); }
};

struct KMeansResult {
  BehaviorVocab vocab;
  std::vector<double> sse_history;  // after seeding, then after every Lloyd iteration
  int iterations = 0;
  bool converged = false;
};

KMeansResult kmeans_fit(const std::vector<std::vector<double>>& samples, int num_states,
                        int max_iters, std::uint64_t seed);

// argmin over centers of squared distance; ties go to the lowest index.
int assign_state(const std::vector<double>& sample, const BehaviorVocab& vocab);
double squared_distance(const std::vector<double>& a, const std::vector<double>& b);

// Straight walk toward the control point: the initial "previous state" of every agent.
std::vector<double> straight_segment(int segment_frames);

void write_vocab(const std::string& path, const BehaviorVocab& vocab);
BehaviorVocab read_vocab(const std::string& path);

}  // namespace crowdes
