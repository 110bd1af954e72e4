#include "crowdes/runner.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "crowdes/error.hpp"
#include "crowdes/nav_mesh.hpp"
#include "crowdes/se_orca.hpp"

namespace crowdes {

namespace fs = std::filesystem;

SceneData make_scene(const Scenario& scenario, const GridRaster& segmentation, int population_support) {
  SceneData scene;
  scene.scene_id = scenario.scene_id;
  scene.fps = scenario.fps;
  scene.train = scenario;
  scene.layout = derive_layout(segmentation, scenario, population_support);
  scene.prior = derive_agent_prior(scenario);
  return scene;
}

SceneData prepare_scene(const SceneConfig& config) {
  if (!fs::exists(config.trajectories)) throw MissingArtifactError("trajectory file not found: " + config.trajectories);
  Scenario raw = parse_trajectory_file(config.trajectories, config.format, config.parse);
  raw.scene_id = config.scene_id;
  if (raw.agents.empty()) throw InputError(config.trajectories + ": no agents");
  if (config.fps > raw.fps + 1e-9) {
    throw InputError("data rate " + std::to_string(raw.fps) + " fps is below the requested " +
                     std::to_string(config.fps) + " fps");
  }
  Scenario scenario = resample_fps(raw, config.fps);
  GridRaster segmentation;
  if (!config.segmentation.empty()) {
    if (!fs::exists(config.segmentation)) throw MissingArtifactError("segmentation not found: " + config.segmentation);
    segmentation = read_pgm(config.segmentation, config.cell_size, config.origin.value_or(Vec2{}));
  } else {
    RasterGeometry g = grid_for_bounds(scenario.bounds(), config.cell_size, config.margin);
    if (config.origin) g.origin = *config.origin;
    segmentation = GridRaster(g, static_cast<double>(SegClass::kSidewalk));
  }
  return make_scene(scenario, segmentation, config.population_support);
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

fs::path require(const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifactError("missing artifact: " + path.string());
  return path;
}

}  // namespace

void save_scene(const SceneData& scene, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path d(dir);
  const RasterGeometry& g = scene.layout.geometry();
  std::ostringstream meta;
  meta << std::setprecision(17) << "scene = " << scene.scene_id << "\nfps = " << scene.fps
       << "\nwidth = " << g.width_cells << "\nheight = " << g.height_cells << "\ncell_size = " << g.cell_size
       << "\norigin_x = " << g.origin.x << "\norigin_y = " << g.origin.y << '\n';
  write_text(d / "scene.txt", meta.str());
  write_pgm((d / "segmentation.pgm").string(), scene.layout.segmentation);
  write_pgm((d / "appearance.pgm").string(), scene.layout.appearance);
  write_pgm((d / "traversable.pgm").string(), scene.layout.traversable);
  write_text_grid((d / "density.txt").string(), scene.layout.density);
  std::ostringstream pop;
  pop << std::setprecision(17);
  for (std::size_t i = 0; i < scene.layout.population_prob.size(); ++i) {
    pop << (i ? " " : "") << scene.layout.population_prob[i];
  }
  pop << '\n';
  write_text(d / "population.txt", pop.str());
  scene.prior.save((d / "prior.txt").string());
  write_scenario((d / "train.traj").string(), scene.train);
}

SceneData load_scene(const std::string& dir) {
  const fs::path d(dir);
  const KeyValueConfig meta = KeyValueConfig::load(require(d / "scene.txt").string());
  SceneData scene;
  scene.scene_id = meta.get_or("scene", "");
  scene.fps = meta.get_double("fps", 5.0);
  const double cs = meta.get_double("cell_size", 0.5);
  const Vec2 origin{meta.get_double("origin_x", 0.0), meta.get_double("origin_y", 0.0)};
  scene.layout.segmentation = read_pgm(require(d / "segmentation.pgm").string(), cs, origin);
  scene.layout.appearance = read_pgm(require(d / "appearance.pgm").string(), cs, origin);
  scene.layout.traversable = read_pgm(require(d / "traversable.pgm").string(), cs, origin);
  scene.layout.density = read_text_grid(require(d / "density.txt").string());
  std::ifstream pop(require(d / "population.txt"));
  double p = 0.0;
  while (pop >> p) scene.layout.population_prob.push_back(p);
  scene.layout.validate();
  scene.prior = AgentPrior::load(require(d / "prior.txt").string());
  scene.train = parse_trajectory_file(require(d / "train.traj").string(), TrajectoryFormat::kGeneric);
  return scene;
}

Models train_models(const SceneData& scene, const RunConfig& config, TrainSummary* summary, std::ostream* log) {
  if (scene.train.agents.empty()) throw InputError("training data is empty");
  TrainSummary local;
  Models models;
  const NavGraph graph(scene.layout.traversable);
  const SimulatorConfig sim_config = config.simulator_config();

  const std::vector<MotionSegment> segments = simulator_segments(scene.train, graph, sim_config);
  std::vector<std::vector<double>> samples;
  for (const auto& s : segments) samples.push_back(s.flat());
  local.segments = static_cast<int>(samples.size());
  const int states = config.ablation.no_switching ? 1 : config.states;
  if (log != nullptr) *log << "segments: " << samples.size() << ", fitting " << states << " behavior states\n";
  KMeansResult km = kmeans_fit(samples, states, config.kmeans_iters, config.seed);
  local.kmeans_sse = km.sse_history;
  km.vocab.segment_frames = config.segment_frames;
  models.vocab = km.vocab;

  const std::vector<SimExample> sim_data = build_simulator_dataset(scene.train, scene.layout, graph, models.vocab, sim_config);
  SimulatorModel sim(sim_config, models.vocab);
  sim.set_norm(fit_feature_norm(sim_data));
  SimTrainOptions sim_opts;
  sim_opts.epochs = config.sim_epochs;
  sim_opts.batch = config.sim_batch;
  sim_opts.adam.lr = config.sim_lr;
  Rng sim_rng = named_stream(config.seed, "train-simulator");
  local.simulator = train_simulator(sim, sim_data, sim_opts, sim_rng);
  if (log != nullptr && !local.simulator.transition_loss.empty()) {
    *log << "simulator: CE " << local.simulator.transition_loss.front() << " -> "
         << local.simulator.transition_loss.back() << ", MAE " << local.simulator.decoder_loss.front() << " -> "
         << local.simulator.decoder_loss.back() << '\n';
  }
  models.simulator.emplace(std::move(sim));

  EmitterConfig em_config;
  em_config.steps = config.diffusion_steps;
  em_config.window = config.window;
  em_config.seed = config.seed;
  EmitterModel emitter(em_config);
  emitter.codec() = fit_codec(scene.train, scene.layout, config.window);
  const auto em_data = build_emitter_dataset(scene.train, scene.layout, config.window, em_config.context_grid,
                                             emitter.codec());
  local.emitter_windows = static_cast<int>(em_data.size());
  TrainOptions em_opts;
  em_opts.epochs = config.emitter_epochs;
  em_opts.batch = config.emitter_batch;
  em_opts.adam.lr = config.emitter_lr;
  Rng em_rng = named_stream(config.seed, "train-emitter");
  local.emitter = train_emitter(emitter, em_data, em_opts, em_rng);
  if (log != nullptr && !local.emitter.epoch_loss.empty()) {
    *log << "emitter: " << em_data.size() << " windows, loss " << local.emitter.epoch_loss.front() << " -> "
         << local.emitter.epoch_loss.back() << '\n';
  }
  models.emitter.emplace(std::move(emitter));
  if (summary != nullptr) *summary = std::move(local);
  return models;
}

void save_models(const Models& models, const TrainSummary& summary, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path d(dir);
  write_vocab((d / "vocab.txt").string(), models.vocab);
  if (models.emitter) models.emitter->save((d / "emitter.ckpt").string());
  if (models.simulator) models.simulator->save((d / "simulator.ckpt").string());
  std::ostringstream log;
  log << std::setprecision(10) << "stage,epoch,loss\n";
  for (std::size_t i = 0; i < summary.kmeans_sse.size(); ++i) log << "kmeans_sse," << i << ',' << summary.kmeans_sse[i] << '\n';
  for (std::size_t i = 0; i < summary.emitter.epoch_loss.size(); ++i) {
    log << "emitter_mse," << i << ',' << summary.emitter.epoch_loss[i] << '\n';
  }
  for (std::size_t i = 0; i < summary.simulator.transition_loss.size(); ++i) {
    log << "transition_ce," << i << ',' << summary.simulator.transition_loss[i] << '\n';
    log << "decoder_mae," << i << ',' << summary.simulator.decoder_loss[i] << '\n';
  }
  write_text(d / "train_log.csv", log.str());
}

Models load_models(const std::string& dir, bool need_emitter, bool need_simulator) {
  const fs::path d(dir);
  Models models;
  if (need_simulator) {
    models.simulator.emplace(SimulatorModel::load(require(d / "simulator.ckpt").string()));
    models.vocab = models.simulator->vocab();
  }
  if (need_emitter) models.emitter.emplace(EmitterModel::load(require(d / "emitter.ckpt").string()));
  return models;
}

namespace {

void apply_overrides(std::vector<AgentStub>& stubs, const RunConfig& config) {
  for (AgentStub& s : stubs) {
    if (config.force_kind) s.kind = *config.force_kind;
    if (config.pace_min) s.pace = std::max(s.pace, *config.pace_min);
    if (config.pace_max) s.pace = std::min(s.pace, *config.pace_max);
  }
}

}  // namespace

Scenario generate_scenario(const SceneData& scene, const Models* models, const RunConfig& config, std::uint64_t seed,
                           GenerateReport* report) {
  GenerateReport local;
  for (auto& w : config.validate()) local.warnings.push_back(w);
  SceneLayout layout = scene.layout;
  if (!config.appearance.empty()) {
    if (!fs::exists(config.appearance)) throw MissingArtifactError("appearance override not found: " + config.appearance);
    GridRaster a = read_pgm(config.appearance, layout.geometry().cell_size, layout.geometry().origin);
    if (a.width() != layout.geometry().width_cells || a.height() != layout.geometry().height_cells) {
      throw InputError("appearance override does not match the scene grid");
    }
    for (double& v : a.values()) v = v > 0.0 ? 1.0 : 0.0;
    layout.appearance = std::move(a);
  }
  const std::vector<double>& prob = config.population_prob.empty() ? layout.population_prob : config.population_prob;
  const NavGraph graph(layout.traversable);

  const bool histogram = config.engine == Engine::kSeOrca || config.emitter == EmitterKind::kHistogram ||
                         config.ablation.no_diffusion;
  const bool needs_models = config.engine == Engine::kCrowdes;
  if (needs_models && (models == nullptr || !models->simulator)) {
    throw MissingArtifactError("simulator checkpoint required for the crowdes engine");
  }
  if (needs_models && !histogram && !models->emitter) {
    throw MissingArtifactError("emitter checkpoint required for the diffusion emitter");
  }

  Rng emit_rng = named_stream(seed, "emit");
  Rng count_rng = named_stream(seed, "count");
  Rng switch_rng = named_stream(seed, "switch");
  int dropped = 0;
  const EmitFn emit = [&](int ws, int count, std::span<const Vec2> occupied) {
    EmitResult r;
    if (histogram) {
      r = histogram_emit(layout.appearance, graph, scene.prior, count, ws, config.window, emit_rng);
    } else {
      EmitOptions opts;
      opts.window_start = ws;
      opts.sampling_steps = config.sampling_steps;
      opts.window = config.window;
      r = emit_agents(*models->emitter, layout, graph, occupied, count, opts, emit_rng);
    }
    dropped += r.dropped;
    apply_overrides(r.agents, config);
    return r.agents;
  };

  SimulatorConfig orca_config = config.simulator_config();
  const StepFn step = [&](SimState& state, int ws, int len) {
    if (config.engine == Engine::kSeOrca) return orca_step_window(state, graph, orca_config, OrcaOptions{}, ws, len);
    return step_window(state, *models->simulator, graph, layout, ws, len, switch_rng);
  };

  RolloutOptions opts;
  opts.duration = config.duration_frames;
  opts.window = config.window;
  opts.fps = config.fps;
  opts.scene_id = scene.scene_id;
  Scenario out = rollout(prob, opts, emit, step, count_rng, &local.rollout);
  local.rollout.dropped += dropped;
  if (dropped > 0) {
    local.warnings.push_back(std::to_string(dropped) + " emitted agent(s) dropped: no traversable cell within 2 m");
  }
  if (report != nullptr) *report = std::move(local);
  return out;
}

std::vector<Scenario> generate_repetitions(const SceneData& scene, const Models* models, const RunConfig& config,
                                           std::vector<std::uint64_t>* seeds) {
  const int reps = std::max(config.reps, 1);
  std::vector<std::uint64_t> rep_seeds(reps);
  for (int r = 0; r < reps; ++r) rep_seeds[r] = named_stream(config.seed, "eval", static_cast<std::uint64_t>(r))();
  std::vector<Scenario> out(reps);
  std::vector<std::exception_ptr> errors(reps);
  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, reps);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int r = t; r < reps; r += threads) {
        try {
          out[r] = generate_scenario(scene, models, config, rep_seeds[r]);
        } catch (...) {
          errors[r] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (seeds != nullptr) *seeds = rep_seeds;
  return out;
}

}  // namespace crowdes
