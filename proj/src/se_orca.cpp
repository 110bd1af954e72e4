#include "crowdes/se_orca.hpp"

#include <algorithm>
#include <cmath>

namespace crowdes {

namespace {

constexpr double kEps = 1e-5;

bool linear_program1(const std::vector<OrcaLine>& lines, std::size_t line_no, double radius, const Vec2& opt,
                     bool direction_opt, Vec2& result) {
  const OrcaLine& line = lines[line_no];
  const double dot_product = dot(line.point, line.direction);
  const double discriminant = dot_product * dot_product + radius * radius - norm_sq(line.point);
  if (discriminant < 0.0) return false;
  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot_product - sqrt_disc;
  double t_right = -dot_product + sqrt_disc;
  for (std::size_t i = 0; i < line_no; ++i) {
    const double denominator = det(line.direction, lines[i].direction);
    const double numerator = det(lines[i].direction, line.point - lines[i].point);
    if (std::fabs(denominator) <= kEps) {
      if (numerator < 0.0) return false;
      continue;
    }
    const double t = numerator / denominator;
    if (denominator >= 0.0) {
      t_right = std::min(t_right, t);
    } else {
      t_left = std::max(t_left, t);
    }
    if (t_left > t_right) return false;
  }
  if (direction_opt) {
    result = dot(opt, line.direction) > 0.0 ? line.point + t_right * line.direction
                                            : line.point + t_left * line.direction;
  } else {
    const double t = dot(line.direction, opt - line.point);
    result = line.point + std::clamp(t, t_left, t_right) * line.direction;
  }
  return true;
}

std::size_t linear_program2(const std::vector<OrcaLine>& lines, double radius, const Vec2& opt, bool direction_opt,
                            Vec2& result) {
  if (direction_opt) {
    result = opt * radius;
  } else if (norm_sq(opt) > radius * radius) {
    result = normalized(opt) * radius;
  } else {
    result = opt;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) > 0.0) {
      const Vec2 temp = result;
      if (!linear_program1(lines, i, radius, opt, direction_opt, result)) {
        result = temp;
        return i;
      }
    }
  }
  return lines.size();
}

void linear_program3(const std::vector<OrcaLine>& lines, std::size_t begin, double radius, Vec2& result) {
  double dist = 0.0;
  for (std::size_t i = begin; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) <= dist) continue;
    std::vector<OrcaLine> projected;
    for (std::size_t j = 0; j < i; ++j) {
      OrcaLine line;
      const double determinant = det(lines[i].direction, lines[j].direction);
      if (std::fabs(determinant) <= kEps) {
        if (dot(lines[i].direction, lines[j].direction) > 0.0) continue;
        line.point = 0.5 * (lines[i].point + lines[j].point);
      } else {
        line.point = lines[i].point +
                     (det(lines[j].direction, lines[i].point - lines[j].point) / determinant) * lines[i].direction;
      }
      line.direction = normalized(lines[j].direction - lines[i].direction);
      projected.push_back(line);
    }
    const Vec2 temp = result;
    if (linear_program2(projected, radius, Vec2{-lines[i].direction.y, lines[i].direction.x}, true, result) <
        projected.size()) {
      result = temp;
    }
    dist = det(lines[i].direction, lines[i].point - result);
  }
}

}  // namespace

std::vector<OrcaLine> orca_lines(const OrcaAgent& agent, std::span<const OrcaAgent> neighbors,
                                 const OrcaOptions& options) {
  std::vector<OrcaLine> lines;
  const double inv_horizon = 1.0 / options.time_horizon;
  for (const OrcaAgent& other : neighbors) {
    const Vec2 rel_pos = other.position - agent.position;
    if (norm(rel_pos) > options.neighbor_dist) continue;
    const Vec2 rel_vel = agent.velocity - other.velocity;
    const double dist_sq = norm_sq(rel_pos);
    const double combined = agent.radius + other.radius + options.safety_margin;
    const double combined_sq = combined * combined;
    OrcaLine line;
    Vec2 u;
    if (dist_sq > combined_sq) {
      const Vec2 w = rel_vel - inv_horizon * rel_pos;
      const double w_len_sq = norm_sq(w);
      const double dot1 = dot(w, rel_pos);
      if (dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq) {
        const double w_len = std::sqrt(w_len_sq);
        const Vec2 unit_w = w / w_len;
        line.direction = {unit_w.y, -unit_w.x};
        u = (combined * inv_horizon - w_len) * unit_w;
      } else {
        const double leg = std::sqrt(dist_sq - combined_sq);
        if (det(rel_pos, w) > 0.0) {
          line.direction = Vec2{rel_pos.x * leg - rel_pos.y * combined, rel_pos.x * combined + rel_pos.y * leg} / dist_sq;
        } else {
          line.direction =
              -Vec2{rel_pos.x * leg + rel_pos.y * combined, -rel_pos.x * combined + rel_pos.y * leg} / dist_sq;
        }
        u = dot(rel_vel, line.direction) * line.direction - rel_vel;
      }
    } else {
      const double inv_step = 1.0 / options.time_step;
      const Vec2 w = rel_vel - inv_step * rel_pos;
      const double w_len = norm(w);
      const Vec2 unit_w = w_len > 0.0 ? w / w_len : Vec2{1.0, 0.0};
      line.direction = {unit_w.y, -unit_w.x};
      u = (combined * inv_step - w_len) * unit_w;
    }
    line.point = agent.velocity + 0.5 * u;
    lines.push_back(line);
  }
  return lines;
}

Vec2 orca_velocity(const OrcaAgent& agent, std::span<const OrcaAgent> neighbors, const OrcaOptions& options) {
  const std::vector<OrcaLine> lines = orca_lines(agent, neighbors, options);
  Vec2 result;
  const std::size_t fail = linear_program2(lines, agent.max_speed, agent.pref_velocity, false, result);
  if (fail < lines.size()) linear_program3(lines, fail, agent.max_speed, result);
  return result;
}

namespace {

Vec2 last_velocity(const LiveAgent& a, double fps) {
  const auto& t = a.record.trajectory;
  return t.size() < 2 ? Vec2{} : (t.back() - t[t.size() - 2]) * fps;
}

}  // namespace

WindowReport orca_step_window(SimState& state, const NavGraph& graph, const SimulatorConfig& config,
                              const OrcaOptions& options, int window_start, int window) {
  WindowReport report;
  const double dt = 1.0 / config.fps;
  for (int f = window_start; f < window_start + window; ++f) {
    std::vector<OrcaAgent> agents;
    agents.reserve(state.live.size());
    for (const LiveAgent& a : state.live) {
      OrcaAgent o;
      o.position = a.record.trajectory.back();
      o.velocity = last_velocity(a, config.fps);
      o.max_speed = 1.5 * a.record.pace;
      const Vec2 to_goal = a.goal - o.position;
      if (norm(to_goal) <= a.record.pace * dt) {
        o.pref_velocity = to_goal / dt;
      } else {
        const Vec2 control = control_point(a.path, o.position, a.record.pace, config.horizon_s);
        o.pref_velocity = normalized(control - o.position) * a.record.pace;
      }
      agents.push_back(o);
    }
    std::vector<Vec2> next(agents.size());
    std::vector<OrcaAgent> others;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      others.clear();
      for (std::size_t j = 0; j < agents.size(); ++j) {
        if (j != i) others.push_back(agents[j]);
      }
      OrcaOptions o = options;
      o.time_step = dt;
      next[i] = agents[i].position + orca_velocity(agents[i], others, o) * dt;
    }
    for (std::size_t i = 0; i < state.live.size(); ++i) {
      LiveAgent& a = state.live[i];
      Vec2 p = next[i];
      if (!graph.traversable(p)) {
        if (!keep_traversable(graph, p)) p = a.record.trajectory.back();
        ++report.reprojected;
      }
      a.record.trajectory.push_back(p);
      a.record.end_frame = f;
      ++report.rows;
    }
    depart_and_spawn(state, f, graph, config, report);
  }
  return report;
}

Scenario se_orca_generate(const SceneLayout& layout, const NavGraph& graph, const AgentPrior& prior,
                          std::span<const double> population_prob, int duration, const SeOrcaConfig& config,
                          std::uint64_t seed, const std::string& scene_id) {
  Rng emit_rng = named_stream(seed, "emit");
  Rng count_rng = named_stream(seed, "count");
  RolloutOptions opts;
  opts.duration = duration;
  opts.window = config.window;
  opts.warmup = config.warmup;
  opts.fps = config.sim.fps;
  opts.scene_id = scene_id;
  const EmitFn emit = [&](int ws, int count, std::span<const Vec2>) {
    return histogram_emit(layout.appearance, graph, prior, count, ws, config.window, emit_rng).agents;
  };
  const StepFn step = [&](SimState& state, int ws, int len) {
    return orca_step_window(state, graph, config.sim, config.orca, ws, len);
  };
  return rollout(population_prob, opts, emit, step, count_rng);
}

}  // namespace crowdes
