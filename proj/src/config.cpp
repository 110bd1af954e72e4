#include "crowdes/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crowdes/error.hpp"

namespace crowdes {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& source) {
  KeyValueConfig kv;
  kv.source_ = source;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw InputError(source + ":" + std::to_string(line_no) + ": empty key");
    kv.values_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("config file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  KeyValueConfig kv = parse(ss.str(), path);
  kv.base_dir_ = std::filesystem::path(path).parent_path().string();
  return kv;
}

const std::string& KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw InputError(source_ + ": missing key '" + key + "'");
  return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? parse_double(get(key), source_ + ": " + key) : fallback;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  return has(key) ? parse_int(get(key), source_ + ": " + key) : fallback;
}

std::string KeyValueConfig::resolve(const std::string& path) const {
  if (path.empty() || base_dir_.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir_) / path).string();
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InputError(what + ": expected a number, got '" + text + "'");
  }
  return v;
}

int parse_int(const std::string& text, const std::string& what) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InputError(what + ": expected an integer, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InputError(what + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(item, what));
  }
  return out;
}

SceneConfig SceneConfig::from(const KeyValueConfig& kv) {
  SceneConfig c;
  c.scene_id = kv.get("scene");
  c.segmentation = kv.resolve(kv.get_or("segmentation", ""));
  c.cell_size = kv.get_double("cell_size", 0.5);
  if (kv.has("origin_x") || kv.has("origin_y")) {
    c.origin = Vec2{kv.get_double("origin_x", 0.0), kv.get_double("origin_y", 0.0)};
  }
  c.trajectories = kv.resolve(kv.get("trajectories"));
  c.format = parse_format_tag(kv.get_or("format", "generic"));
  c.parse.video_fps = kv.get_double("video_fps", 25.0);
  c.parse.frame_step = kv.get_int("frame_step", 0);
  c.parse.world_scale = kv.get_double("world_scale", 1.0);
  c.parse.scene_id = c.scene_id;
  if (kv.has("homography")) {
    const auto h = parse_double_list(kv.get("homography"), "homography");
    if (h.size() != 9) throw InputError("homography needs 9 comma-separated values");
    std::array<double, 9> m{};
    std::copy(h.begin(), h.end(), m.begin());
    c.parse.homography = m;
  }
  c.fps = kv.get_double("fps", 5.0);
  c.margin = kv.get_double("margin", 2.0);
  c.population_support = kv.get_int("population_support", 0);
  if (c.cell_size <= 0.0) throw InputError("cell_size must be positive");
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const std::string& k = key;
  if (k == "scene") {
    scene_id = value;
  } else if (k == "engine") {
    if (value == "crowdes") {
      engine = Engine::kCrowdes;
    } else if (value == "se-orca") {
      engine = Engine::kSeOrca;
    } else {
      throw InputError("engine must be crowdes or se-orca, got '" + value + "'");
    }
  } else if (k == "emitter") {
    if (value == "diffusion") {
      emitter = EmitterKind::kDiffusion;
    } else if (value == "histogram") {
      emitter = EmitterKind::kHistogram;
    } else {
      throw InputError("emitter must be diffusion or histogram, got '" + value + "'");
    }
  } else if (k == "duration_frames") {
    duration_frames = parse_int(value, k);
  } else if (k == "fps") {
    fps = parse_double(value, k);
  } else if (k == "window") {
    window = parse_int(value, k);
  } else if (k == "segment_frames") {
    segment_frames = parse_int(value, k);
  } else if (k == "history_frames") {
    history_frames = parse_int(value, k);
  } else if (k == "states") {
    states = parse_int(value, k);
  } else if (k == "diffusion_steps") {
    diffusion_steps = parse_int(value, k);
  } else if (k == "sampling_steps") {
    sampling_steps = parse_int(value, k);
  } else if (k == "seed") {
    seed = parse_u64(value, k);
  } else if (k == "ablate") {
    ablation = Ablation::parse(value);
  } else if (k == "scale_mode") {
    if (value == "control") {
      scale_mode = ScaleMode::kControlDistance;
    } else if (value == "pace") {
      scale_mode = ScaleMode::kPace;
    } else {
      throw InputError("scale_mode must be control or pace, got '" + value + "'");
    }
  } else if (k == "horizon_s") {
    horizon_s = parse_double(value, k);
  } else if (k == "emitter_epochs") {
    emitter_epochs = parse_int(value, k);
  } else if (k == "emitter_batch") {
    emitter_batch = parse_int(value, k);
  } else if (k == "emitter_lr") {
    emitter_lr = parse_double(value, k);
  } else if (k == "sim_epochs") {
    sim_epochs = parse_int(value, k);
  } else if (k == "sim_batch") {
    sim_batch = parse_int(value, k);
  } else if (k == "sim_lr") {
    sim_lr = parse_double(value, k);
  } else if (k == "kmeans_iters") {
    kmeans_iters = parse_int(value, k);
  } else if (k == "force_kind") {
    const auto kind = parse_kind(value);
    if (!kind) throw InputError("unknown agent kind '" + value + "'");
    force_kind = *kind;
  } else if (k == "pace_min") {
    pace_min = parse_double(value, k);
  } else if (k == "pace_max") {
    pace_max = parse_double(value, k);
  } else if (k == "population_prob") {
    population_prob = parse_double_list(value, k);
  } else if (k == "appearance") {
    appearance = value;
  } else if (k == "reps") {
    reps = parse_int(value, k);
  } else if (k == "threads") {
    threads = parse_int(value, k);
  } else {
    throw InputError("unknown run setting '" + key + "'");
  }
}

void RunConfig::apply(const KeyValueConfig& kv) {
  for (const auto& [key, value] : kv.values()) {
    set(key, key == "appearance" ? kv.resolve(value) : value);
  }
}

std::vector<std::string> RunConfig::validate() const {
  if (window < 1 || segment_frames < 1 || history_frames < 1 || states < 1 || diffusion_steps < 1) {
    throw InputError("window, segment, history, state and diffusion sizes must be positive");
  }
  if (fps <= 0.0) throw InputError("fps must be positive");
  if (duration_frames < 0) throw InputError("duration must be non-negative");
  if (reps < 1) throw InputError("reps must be at least 1");
  if (pace_min && pace_max && *pace_min > *pace_max) throw InputError("pace_min exceeds pace_max");
  if (!population_prob.empty()) {
    double sum = 0.0;
    for (double p : population_prob) {
      if (p < 0.0) throw InputError("population_prob entries must be non-negative");
      sum += p;
    }
    if (sum <= 0.0) throw InputError("population_prob must have positive mass");
  }
  std::vector<std::string> warnings;
  if (window % segment_frames != 0) {
    warnings.push_back("window " + std::to_string(window) + " is not a multiple of the segment length " +
                       std::to_string(segment_frames));
  }
  return warnings;
}

SimulatorConfig RunConfig::simulator_config() const {
  SimulatorConfig c;
  c.segment_frames = segment_frames;
  c.history_frames = history_frames;
  c.fps = fps;
  c.horizon_s = horizon_s;
  c.scale_mode = scale_mode;
  c.seed = seed;
  c.ablation = ablation;
  return c;
}

}  // namespace crowdes
