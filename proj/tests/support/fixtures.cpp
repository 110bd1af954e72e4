#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "crowdes/scene_layout.hpp"
#include "crowdes/se_orca.hpp"

namespace crowdes::testing {

namespace {

double uniform(std::mt19937_64& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

GridRaster plain_grid(int w, int h, SegClass fill) {
  RasterGeometry g;
  g.width_cells = w;
  g.height_cells = h;
  g.cell_size = 0.5;
  return GridRaster(g, static_cast<double>(fill));
}

Agent straight_walker(int id, int spawn, const Vec2& from, const Vec2& to, double speed, double fps,
                      std::mt19937_64& rng, double jitter) {
  Agent a;
  a.id = id;
  a.spawn_frame = spawn;
  const double dist = distance(from, to);
  const double step = speed / fps;
  const int n = static_cast<int>(std::ceil(dist / step));
  const Vec2 dir = normalized(to - from);
  const Vec2 side{-dir.y, dir.x};
  std::normal_distribution<double> noise(0.0, jitter);
  for (int k = 0; k <= n; ++k) {
    Vec2 p = from + dir * std::min(k * step, dist);
    if (k > 0 && k < n && jitter > 0.0) p += side * noise(rng);
    a.trajectory.push_back(p);
  }
  a.end_frame = spawn + n;
  a.recompute_pace(fps);
  return a;
}

}  // namespace

Fixture corridor_fixture(std::uint64_t seed, int frames) {
  std::mt19937_64 rng(seed);
  Fixture f;
  f.segmentation = plain_grid(64, 20, SegClass::kSidewalk);
  for (int x = 0; x < 64; ++x) {
    for (int y : {0, 1, 18, 19}) f.segmentation.at(x, y) = static_cast<double>(SegClass::kBuilding);
  }
  Scenario& s = f.scenario;
  s.fps = 5.0;
  s.total_frames = frames;
  s.scene_id = "corridor";
  int t = 0;
  int id = 0;
  while (true) {
    t += std::uniform_int_distribution<int>(15, 35)(rng);
    const Vec2 from{uniform(rng, 0.6, 1.6), uniform(rng, 2.0, 8.0)};
    const Vec2 to{uniform(rng, 30.4, 31.4), uniform(rng, 2.0, 8.0)};
    Agent a = straight_walker(id, t, from, to, uniform(rng, 0.9, 1.1), s.fps, rng, 0.02);
    if (a.end_frame >= frames) break;
    s.agents.push_back(std::move(a));
    ++id;
  }
  return f;
}

bool in_corridor_spawn_zone(const Vec2& p) { return p.x >= 0.0 && p.x < 2.5 && p.y >= 1.5 && p.y < 8.5; }

Fixture crossing_fixture(std::uint64_t seed, int frames) {
  std::mt19937_64 rng(seed);
  Fixture f;
  f.segmentation = plain_grid(40, 40, SegClass::kSidewalk);
  Scenario& s = f.scenario;
  s.fps = 5.0;
  s.total_frames = frames;
  s.scene_id = "crossing";

  struct Walker {
    Agent agent;
    OrcaAgent orca;
    Vec2 goal;
    double pace;
    bool done = false;
  };
  std::vector<Walker> walkers;
  int next_spawn[2] = {0, 5};
  OrcaOptions opts;
  opts.time_step = 1.0 / s.fps;
  for (int frame = 0; frame < frames; ++frame) {
    for (int stream = 0; stream < 2; ++stream) {
      if (frame != next_spawn[stream]) continue;
      next_spawn[stream] += std::uniform_int_distribution<int>(4, 14)(rng);
      const double a = uniform(rng, 9.5, 10.5);
      const double b = uniform(rng, 9.5, 10.5);
      Walker w;
      const Vec2 from = stream == 0 ? Vec2{1.0, a} : Vec2{a, 1.0};
      w.goal = stream == 0 ? Vec2{19.0, b} : Vec2{b, 19.0};
      w.pace = uniform(rng, 0.9, 1.4);
      w.agent.id = static_cast<int>(walkers.size());
      w.agent.spawn_frame = frame;
      w.agent.trajectory.push_back(from);
      w.orca.position = from;
      w.orca.radius = 0.4;
      w.orca.max_speed = 1.5 * w.pace;
      walkers.push_back(std::move(w));
    }
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < walkers.size(); ++i) {
      if (!walkers[i].done && walkers[i].agent.spawn_frame < frame) live.push_back(i);
    }
    std::vector<OrcaAgent> snapshot;
    for (std::size_t i : live) {
      Walker& w = walkers[i];
      const Vec2 to_goal = w.goal - w.orca.position;
      const double d = norm(to_goal);
      w.orca.pref_velocity = d > w.pace * opts.time_step ? to_goal / d * w.pace : to_goal / opts.time_step;
      snapshot.push_back(w.orca);
    }
    std::vector<Vec2> velocities(live.size());
    for (std::size_t k = 0; k < live.size(); ++k) {
      std::vector<OrcaAgent> others;
      for (std::size_t j = 0; j < live.size(); ++j) {
        if (j != k) others.push_back(snapshot[j]);
      }
      velocities[k] = orca_velocity(snapshot[k], others, opts);
    }
    for (std::size_t k = 0; k < live.size(); ++k) {
      Walker& w = walkers[live[k]];
      w.orca.velocity = velocities[k];
      w.orca.position += velocities[k] * opts.time_step;
      w.orca.position.x = std::clamp(w.orca.position.x, 0.3, 19.7);
      w.orca.position.y = std::clamp(w.orca.position.y, 0.3, 19.7);
      w.agent.trajectory.push_back(w.orca.position);
      if (distance(w.orca.position, w.goal) < 0.3) w.done = true;
    }
  }
  int id = 0;
  for (Walker& w : walkers) {
    if (!w.done) continue;
    w.agent.id = id++;
    w.agent.end_frame = w.agent.spawn_frame + static_cast<int>(w.agent.trajectory.size()) - 1;
    w.agent.recompute_pace(s.fps);
    s.agents.push_back(std::move(w.agent));
  }
  return f;
}

Scenario random_scenario(std::uint64_t seed, int agents, int frames, double w, double h) {
  std::mt19937_64 rng(seed);
  Scenario s;
  s.fps = 5.0;
  s.total_frames = frames;
  s.scene_id = "random";
  for (int i = 0; i < agents; ++i) {
    const int spawn = std::uniform_int_distribution<int>(0, frames - 2)(rng);
    const int len = std::uniform_int_distribution<int>(1, frames - spawn)(rng);
    Agent a;
    a.id = i;
    a.kind = static_cast<AgentKind>(std::uniform_int_distribution<int>(0, 5)(rng));
    a.spawn_frame = spawn;
    Vec2 p{uniform(rng, 0.0, w), uniform(rng, 0.0, h)};
    const Vec2 v{uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3)};
    for (int k = 0; k < len; ++k) {
      a.trajectory.push_back(p);
      p += v;
      p.x = std::clamp(p.x, 0.0, w);
      p.y = std::clamp(p.y, 0.0, h);
    }
    a.end_frame = spawn + len - 1;
    a.recompute_pace(s.fps);
    s.agents.push_back(std::move(a));
  }
  return s;
}

}  // namespace crowdes::testing
