#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "crowdes/behavior_vocab.hpp"
#include "crowdes/config.hpp"
#include "crowdes/emitter.hpp"
#include "crowdes/scene_layout.hpp"
#include "crowdes/simulator.hpp"
#include "crowdes/trajectory.hpp"

namespace crowdes {

// Everything `prepare` derives for one scene.
struct SceneData {
  std::string scene_id;
  double fps = 5.0;
  SceneLayout layout;
  Scenario train;
  AgentPrior prior;
};

SceneData prepare_scene(const SceneConfig& config);
// Assembles scene data from an in-memory scenario and segmentation raster.
SceneData make_scene(const Scenario& scenario, const GridRaster& segmentation, int population_support = 0);
void save_scene(const SceneData& scene, const std::string& dir);
SceneData load_scene(const std::string& dir);

struct Models {
  BehaviorVocab vocab;
  std::optional<EmitterModel> emitter;
  std::optional<SimulatorModel> simulator;
};

struct TrainSummary {
  int segments = 0;
  int emitter_windows = 0;
  std::vector<double> kmeans_sse;
  TrainLog emitter;
  SimTrainLog simulator;
};

// Vocabulary fitting, simulator training and emitter training, all seeded from config.seed.
Models train_models(const SceneData& scene, const RunConfig& config, TrainSummary* summary = nullptr,
                    std::ostream* log = nullptr);
void save_models(const Models& models, const TrainSummary& summary, const std::string& dir);
// Throws MissingArtifactError naming the first absent file.
Models load_models(const std::string& dir, bool need_emitter, bool need_simulator);

struct GenerateReport {
  RolloutReport rollout;
  std::vector<std::string> warnings;
};

// Emitter/simulator alternation (or SE-ORCA) for config.duration_frames output frames.
Scenario generate_scenario(const SceneData& scene, const Models* models, const RunConfig& config,
                           std::uint64_t seed, GenerateReport* report = nullptr);

// config.reps independent runs, seeded from named_stream(config.seed, "eval", r), generated
// concurrently. Results are ordered by repetition index.
std::vector<Scenario> generate_repetitions(const SceneData& scene, const Models* models, const RunConfig& config,
                                           std::vector<std::uint64_t>* seeds = nullptr);

}  // namespace crowdes
