#include "crowdes/trajectory.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "crowdes/error.hpp"

namespace crowdes {

namespace {

constexpr std::array<std::string_view, kNumAgentKinds> kKindNames = {
    "pedestrian", "bicyclist", "skateboarder", "car", "cart", "bus"};

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

struct Observation {
  int frame = 0;
  int agent = 0;
  AgentKind kind = AgentKind::kPedestrian;
  Vec2 position;
  int line = 0;
};

[[noreturn]] void fail_line(const std::string& source, int line, const std::string& what) {
  throw InputError(source + ":" + std::to_string(line) + ": " + what);
}

Vec2 pixel_to_world(double u, double v, const ParseOptions& options) {
  if (options.homography) {
    const auto& h = *options.homography;
    const double w = h[6] * u + h[7] * v + h[8];
    if (std::abs(w) < 1e-12) throw InputError("homography maps a point to infinity");
    return {(h[0] * u + h[1] * v + h[2]) / w, (h[3] * u + h[4] * v + h[5]) / w};
  }
  return {u * options.world_scale, v * options.world_scale};
}

bool parse_int(const std::string& token, int& out) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size() || v != std::floor(v)) return false;
    out = static_cast<int>(v);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_double(const std::string& token, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(token, &used);
    return used == token.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<std::string> split_fields(const std::string& line) {
  std::string cleaned = line;
  for (char& c : cleaned) {
    if (c == ',' || c == '"') c = ' ';
  }
  std::istringstream ss(cleaned);
  std::vector<std::string> fields;
  std::string f;
  while (ss >> f) fields.push_back(f);
  return fields;
}

struct GenericHeader {
  double fps = 5.0;
  std::string scene;
  std::optional<int> frames;
};

GenericHeader parse_generic_header(const std::string& line, const std::string& source) {
  std::istringstream ss(line);
  std::string hash, magic, version;
  ss >> hash >> magic >> version;
  if (hash != "#" || magic != "crowdes-traj" || version != "v1") {
    fail_line(source, 1, "expected '# crowdes-traj v1' header");
  }
  GenericHeader header;
  std::string kv;
  while (ss >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail_line(source, 1, "malformed header field '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (key == "fps") {
      if (!parse_double(value, header.fps) || header.fps <= 0) fail_line(source, 1, "bad fps");
    } else if (key == "scene") {
      header.scene = value;
    } else if (key == "frames") {
      int frames = 0;
      if (!parse_int(value, frames) || frames < 0) fail_line(source, 1, "bad frames");
      header.frames = frames;
    }
  }
  return header;
}

}  // namespace

std::string_view kind_name(AgentKind kind) { return kKindNames[static_cast<int>(kind)]; }

std::optional<AgentKind> parse_kind(std::string_view token) {
  const std::string t = lowercase(token);
  for (int i = 0; i < kNumAgentKinds; ++i) {
    if (t == kKindNames[i]) return static_cast<AgentKind>(i);
  }
  if (t == "biker") return AgentKind::kBicyclist;
  if (t == "skater") return AgentKind::kSkateboarder;
  int index = -1;
  if (parse_int(std::string(token), index) && index >= 0 && index < kNumAgentKinds) {
    return static_cast<AgentKind>(index);
  }
  return std::nullopt;
}

void Agent::recompute_pace(double fps) {
  if (trajectory.size() < 2) {
    pace = 0.0;
    return;
  }
  pace = polyline_length(trajectory) / static_cast<double>(trajectory.size() - 1) * fps;
}

int Scenario::alive_count(int frame) const {
  return static_cast<int>(std::count_if(agents.begin(), agents.end(),
                                        [frame](const Agent& a) { return a.alive_at(frame); }));
}

void Scenario::validate() const {
  if (!(fps > 0.0)) throw InputError("scenario fps must be > 0");
  for (const Agent& a : agents) {
    if (a.spawn_frame < 0 || a.end_frame < a.spawn_frame || a.end_frame >= total_frames) {
      throw InputError("agent " + std::to_string(a.id) + " frames outside [0, T_V)");
    }
    if (static_cast<int>(a.trajectory.size()) != a.duration_frames()) {
      throw InputError("agent " + std::to_string(a.id) + " trajectory length mismatch");
    }
  }
}

Bounds Scenario::bounds() const {
  Bounds b;
  for (const Agent& a : agents) {
    for (const Vec2& p : a.trajectory) b.extend(p);
  }
  return b;
}

TrajectoryFormat parse_format_tag(std::string_view tag) {
  const std::string t = lowercase(tag);
  if (t == "ethucy") return TrajectoryFormat::kEthUcy;
  if (t == "sdd") return TrajectoryFormat::kSdd;
  if (t == "generic") return TrajectoryFormat::kGeneric;
  throw InputError("unknown trajectory format '" + std::string(tag) + "'");
}

Scenario parse_trajectory_file(const std::string& path, TrajectoryFormat format,
                               const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open trajectory file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_trajectory_text(buffer.str(), format, options, path);
}

Scenario parse_trajectory_text(std::string_view text, TrajectoryFormat format,
                               const ParseOptions& options, const std::string& source_name) {
  std::vector<Observation> rows;
  GenericHeader header;
  header.scene = options.scene_id;
  bool header_seen = false;

  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (format == TrajectoryFormat::kGeneric && line_no == 1) {
      header = parse_generic_header(line, source_name);
      header_seen = true;
      continue;
    }
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto fields = split_fields(line);
    Observation obs;
    obs.line = line_no;
    switch (format) {
      case TrajectoryFormat::kGeneric: {
        if (fields.size() != 5) fail_line(source_name, line_no, "expected 5 fields");
        double x = 0, y = 0;
        if (!parse_int(fields[0], obs.frame) || !parse_int(fields[1], obs.agent) ||
            !parse_double(fields[3], x) || !parse_double(fields[4], y)) {
          fail_line(source_name, line_no, "malformed row");
        }
        const auto kind = parse_kind(fields[2]);
        if (!kind) fail_line(source_name, line_no, "unknown agent kind '" + fields[2] + "'");
        obs.kind = *kind;
        obs.position = {x, y};
        break;
      }
      case TrajectoryFormat::kEthUcy: {
        if (fields.size() != 4) fail_line(source_name, line_no, "expected 4 fields");
        double u = 0, v = 0;
        if (!parse_int(fields[0], obs.frame) || !parse_int(fields[1], obs.agent) ||
            !parse_double(fields[2], u) || !parse_double(fields[3], v)) {
          fail_line(source_name, line_no, "malformed row");
        }
        obs.position = pixel_to_world(u, v, options);
        break;
      }
      case TrajectoryFormat::kSdd: {
        if (fields.size() < 9 || fields.size() > 10) {
          fail_line(source_name, line_no, "expected 10 fields");
        }
        double xmin = 0, ymin = 0, xmax = 0, ymax = 0;
        int lost = 0;
        if (!parse_int(fields[0], obs.agent) || !parse_double(fields[1], xmin) ||
            !parse_double(fields[2], ymin) || !parse_double(fields[3], xmax) ||
            !parse_double(fields[4], ymax) || !parse_int(fields[5], obs.frame) ||
            !parse_int(fields[6], lost)) {
          fail_line(source_name, line_no, "malformed row");
        }
        if (fields.size() == 10) {
          const auto kind = parse_kind(fields[9]);
          if (!kind) fail_line(source_name, line_no, "unknown agent label '" + fields[9] + "'");
          obs.kind = *kind;
        }
        if (lost != 0) continue;
        obs.position = pixel_to_world(0.5 * (xmin + xmax), 0.5 * (ymin + ymax), options);
        break;
      }
    }
    if (obs.frame < 0) fail_line(source_name, line_no, "negative frame index");
    rows.push_back(obs);
  }
  if (format == TrajectoryFormat::kGeneric && !header_seen) {
    throw InputError(source_name + ":1: missing crowdes-traj header");
  }

  std::map<int, std::vector<Observation>> by_agent;
  for (const auto& r : rows) by_agent[r.agent].push_back(r);
  for (auto& [id, obs] : by_agent) {
    std::sort(obs.begin(), obs.end(),
              [](const Observation& a, const Observation& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < obs.size(); ++i) {
      if (obs[i].frame == obs[i - 1].frame) {
        fail_line(source_name, std::max(obs[i].line, obs[i - 1].line),
                  "agent " + std::to_string(id) + " has repeated frame " +
                      std::to_string(obs[i].frame));
      }
    }
  }

  Scenario scenario;
  scenario.scene_id = header.scene;

  int step = 1;
  int min_frame = 0;
  if (format == TrajectoryFormat::kGeneric) {
    scenario.fps = header.fps;
  } else {
    step = options.frame_step;
    if (step <= 0) {
      step = 0;
      for (const auto& [id, obs] : by_agent) {
        for (std::size_t i = 1; i < obs.size(); ++i) step = std::gcd(step, obs[i].frame - obs[i - 1].frame);
      }
      if (step <= 0) step = 1;
    }
    min_frame = rows.empty() ? 0 : std::min_element(rows.begin(), rows.end(), [](auto& a, auto& b) {
                                     return a.frame < b.frame;
                                   })->frame;
    scenario.fps = options.video_fps / step;
    for (auto& [id, obs] : by_agent) {
      for (auto& o : obs) {
        if ((o.frame - min_frame) % step != 0) {
          fail_line(source_name, o.line, "frame not on the annotation grid");
        }
        o.frame = (o.frame - min_frame) / step;
      }
    }
  }

  int next_id = by_agent.empty() ? 0 : by_agent.rbegin()->first + 1;
  int max_end = -1;
  const int max_gap = std::max(1, options.max_interpolated_gap);
  for (const auto& [id, obs] : by_agent) {
    std::size_t begin = 0;
    bool first_piece = true;
    while (begin < obs.size()) {
      Agent agent;
      agent.id = first_piece ? id : next_id++;
      agent.kind = obs[begin].kind;
      agent.spawn_frame = obs[begin].frame;
      agent.trajectory.push_back(obs[begin].position);
      std::size_t i = begin + 1;
      for (; i < obs.size(); ++i) {
        const int gap = obs[i].frame - obs[i - 1].frame;
        if (gap > max_gap) break;
        for (int k = 1; k < gap; ++k) {
          const double t = static_cast<double>(k) / gap;
          agent.trajectory.push_back(obs[i - 1].position * (1.0 - t) + obs[i].position * t);
        }
        agent.trajectory.push_back(obs[i].position);
      }
      agent.end_frame = agent.spawn_frame + static_cast<int>(agent.trajectory.size()) - 1;
      agent.recompute_pace(scenario.fps);
      max_end = std::max(max_end, agent.end_frame);
      scenario.agents.push_back(std::move(agent));
      begin = i;
      first_piece = false;
    }
  }
  std::sort(scenario.agents.begin(), scenario.agents.end(),
            [](const Agent& a, const Agent& b) { return a.id < b.id; });
  scenario.total_frames = std::max(max_end + 1, header.frames.value_or(0));
  scenario.validate();
  return scenario;
}

std::string format_scenario(const Scenario& scenario) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "# crowdes-traj v1 fps=%.17g scene=%s frames=%d\n", scenario.fps,
                scenario.scene_id.empty() ? "scene" : scenario.scene_id.c_str(),
                scenario.total_frames);
  out += buf;
  struct Row {
    int frame;
    int id;
    std::size_t agent;
  };
  std::vector<Row> rows;
  for (std::size_t a = 0; a < scenario.agents.size(); ++a) {
    const Agent& agent = scenario.agents[a];
    for (int f = agent.spawn_frame; f <= agent.end_frame; ++f) rows.push_back({f, agent.id, a});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
  });
  auto quantize = [](double v) {
    const double q = std::round(v * 1e4) / 1e4;
    return q == 0.0 ? 0.0 : q;
  };
  for (const Row& r : rows) {
    const Agent& agent = scenario.agents[r.agent];
    const Vec2& p = agent.position_at(r.frame);
    std::snprintf(buf, sizeof buf, "%d %d %s %.4f %.4f\n", r.frame, r.id,
                  std::string(kind_name(agent.kind)).c_str(), quantize(p.x), quantize(p.y));
    out += buf;
  }
  return out;
}

void write_scenario(const std::string& path, const Scenario& scenario) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write scenario: " + path);
  out << format_scenario(scenario);
}

Scenario resample_fps(const Scenario& scenario, double target_fps) {
  if (!(target_fps > 0.0)) throw InputError("target fps must be > 0");
  if (target_fps > scenario.fps + 1e-12) {
    throw InputError("target fps exceeds source fps; upsampling is not supported");
  }
  if (target_fps == scenario.fps) return scenario;
  const double ratio = target_fps / scenario.fps;
  Scenario out;
  out.fps = target_fps;
  out.scene_id = scenario.scene_id;
  int max_end = -1;
  for (const Agent& a : scenario.agents) {
    Agent r;
    r.id = a.id;
    r.kind = a.kind;
    r.spawn_frame = static_cast<int>(std::lround(a.spawn_frame * ratio));
    r.end_frame = std::max(r.spawn_frame, static_cast<int>(std::lround(a.end_frame * ratio)));
    for (int g = r.spawn_frame; g <= r.end_frame; ++g) {
      if (g == r.spawn_frame) {
        r.trajectory.push_back(a.start());
        continue;
      }
      if (g == r.end_frame) {
        r.trajectory.push_back(a.destination());
        continue;
      }
      const double src = std::clamp(g / ratio, static_cast<double>(a.spawn_frame),
                                    static_cast<double>(a.end_frame));
      const int lo = static_cast<int>(std::floor(src));
      const int hi = std::min(lo + 1, a.end_frame);
      const double t = src - lo;
      r.trajectory.push_back(a.position_at(lo) * (1.0 - t) + a.position_at(hi) * t);
    }
    r.recompute_pace(target_fps);
    max_end = std::max(max_end, r.end_frame);
    out.agents.push_back(std::move(r));
  }
  const int scaled = scenario.total_frames > 0
                         ? static_cast<int>(std::floor((scenario.total_frames - 1) * ratio + 1e-9)) + 1
                         : 0;
  out.total_frames = std::max(scaled, max_end + 1);
  return out;
}

std::vector<Window> window_scenario(const Scenario& scenario, int window_frames) {
  if (window_frames < 1) throw InputError("window length must be >= 1");
  std::vector<Window> windows;
  for (int start = 0; start < scenario.total_frames; start += window_frames) {
    Window w;
    w.start = start;
    w.length = std::min(window_frames, scenario.total_frames - start);
    for (int i = 0; i < static_cast<int>(scenario.agents.size()); ++i) {
      const Agent& a = scenario.agents[i];
      if (a.spawn_frame >= start && a.spawn_frame < start + window_frames) w.spawned.push_back(i);
      if (start > 0 && a.alive_at(start - 1)) w.alive_at_start.push_back(i);
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

Scenario truncate_scenario(const Scenario& scenario, int frames) {
  Scenario out;
  out.fps = scenario.fps;
  out.scene_id = scenario.scene_id;
  out.total_frames = std::min(scenario.total_frames, std::max(frames, 0));
  for (const Agent& a : scenario.agents) {
    if (a.spawn_frame >= out.total_frames) continue;
    Agent c = a;
    if (c.end_frame >= out.total_frames) {
      c.end_frame = out.total_frames - 1;
      c.trajectory.resize(static_cast<std::size_t>(c.duration_frames()));
      c.recompute_pace(out.fps);
    }
    out.agents.push_back(std::move(c));
  }
  return out;
}

}  // namespace crowdes
