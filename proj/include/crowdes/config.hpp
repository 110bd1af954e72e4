#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crowdes/behavior_vocab.hpp"
#include "crowdes/simulator.hpp"
#include "crowdes/trajectory.hpp"

namespace crowdes {

// Line-oriented `key = value` text; `#` starts a comment. Later keys override earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& source = "<config>");
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }
  // Directory of the file the config was loaded from, for resolving relative paths.
  const std::string& base_dir() const { return base_dir_; }
  std::string resolve(const std::string& path) const;

 private:
  std::map<std::string, std::string> values_;
  std::string source_;
  std::string base_dir_;
};

double parse_double(const std::string& text, const std::string& what);
int parse_int(const std::string& text, const std::string& what);
std::uint64_t parse_u64(const std::string& text, const std::string& what);
std::vector<double> parse_double_list(const std::string& text, const std::string& what);

// Scene description consumed by `prepare`.
struct SceneConfig {
  std::string scene_id;
  std::string segmentation;  // PGM path; absent means an all-sidewalk grid over the data bounds
  double cell_size = 0.5;
  std::optional<Vec2> origin;
  std::string trajectories;
  TrajectoryFormat format = TrajectoryFormat::kGeneric;
  ParseOptions parse;
  double fps = 5.0;
  double margin = 2.0;  // grid margin around the data when no origin is given
  int population_support = 0;

  static SceneConfig from(const KeyValueConfig& kv);
};

enum class Engine { kCrowdes, kSeOrca };
enum class EmitterKind { kDiffusion, kHistogram };

struct RunConfig {
  std::string scene_id;
  Engine engine = Engine::kCrowdes;
  EmitterKind emitter = EmitterKind::kDiffusion;
  int duration_frames = 18000;
  double fps = 5.0;
  int window = 50;          // T_w
  int segment_frames = 20;  // T_f
  int history_frames = 10;  // T_h
  int states = 8;           // B
  int diffusion_steps = 50; // M
  int sampling_steps = 0;   // 0: all M
  std::uint64_t seed = 0;
  Ablation ablation;
  ScaleMode scale_mode = ScaleMode::kControlDistance;
  double horizon_s = 4.0;

  int emitter_epochs = 256;
  int emitter_batch = 512;
  double emitter_lr = 1e-4;
  int sim_epochs = 64;
  int sim_batch = 2048;
  double sim_lr = 1e-4;
  int kmeans_iters = 100;

  // Controllability overrides.
  std::optional<AgentKind> force_kind;
  std::optional<double> pace_min;
  std::optional<double> pace_max;
  std::vector<double> population_prob;  // empty: the scene's
  std::string appearance;                // PGM path; empty: the scene's

  int reps = 20;
  int threads = 0;

  // Applies one key; throws InputError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void apply(const KeyValueConfig& kv);
  // Throws InputError on invalid sizes; returns advisory warnings.
  std::vector<std::string> validate() const;
  SimulatorConfig simulator_config() const;
};

}  // namespace crowdes
