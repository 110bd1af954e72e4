#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "crowdes/behavior_vocab.hpp"
#include "crowdes/emitter.hpp"
#include "crowdes/nav_mesh.hpp"
#include "crowdes/nn.hpp"
#include "crowdes/rng.hpp"
#include "crowdes/scene_layout.hpp"
#include "crowdes/trajectory.hpp"

namespace crowdes {

struct Ablation {
  bool no_layout = false;     // zero map crop
  bool no_navmesh = false;    // straight-line control point
  bool no_social = false;     // zero neighbor features
  bool no_switching = false;  // single behavior state
  bool no_diffusion = false;  // histogram emitter instead of the diffusion model

  // Comma-separated: no-layout, no-navmesh, no-social, no-switching, no-diffusion, none.
  static Ablation parse(std::string_view list);
  std::string to_string() const;
  bool operator==(const Ablation&) const = default;
};

struct SimulatorConfig {
  int segment_frames = 20;  // T_f
  int history_frames = 10;  // T_h
  int neighbors = 8;
  double neighbor_radius = 16.0;
  int crop_cells = 16;
  double crop_cell_size = 1.0;
  int crop_pool = 4;  // crop is average-pooled in crop_pool x crop_pool blocks
  int hidden = 128;
  double fps = 5.0;
  double horizon_s = 4.0;
  ScaleMode scale_mode = ScaleMode::kControlDistance;
  double arrival_radius = 1.0;
  double lifetime_factor = 4.0;
  std::uint64_t seed = 0;
  Ablation ablation;

  int condition_dims() const;
  CanonicalFrameOptions frame_options() const { return {horizon_s, scale_mode}; }
};

struct Neighbor {
  Vec2 position;
  Vec2 velocity;
};

struct ConditionInput {
  AgentKind kind = AgentKind::kPedestrian;
  double pace = 1.0;
  Vec2 position;
  Vec2 destination;
  Vec2 control;
  SimilarityTransform frame;
  std::vector<Vec2> history;  // T_h previous positions, most recent first
  Vec2 velocity;
  std::vector<Neighbor> others;  // every other live agent
};

// Previous T_h positions before index k, most recent first, padded with traj[0].
std::vector<Vec2> history_window(const std::vector<Vec2>& traj, int k, int history_frames);
// Mean velocity over the last T_h frames ending at index k (zero at k == 0).
Vec2 history_velocity(const std::vector<Vec2>& traj, int k, int history_frames, double fps);

// Kind one-hot, pace, destination and control point, own velocity, history, k nearest
// neighbors (relative position, relative velocity, presence) and the pooled map crop,
// all rotated into the agent's canonical frame.
std::vector<double> build_conditions(const ConditionInput& input, const SceneLayout& layout,
                                     const SimulatorConfig& config);

struct FeatureNorm {
  std::vector<double> mean;
  std::vector<double> stddev;
};

class SimulatorModel {
 public:
  SimulatorModel(const SimulatorConfig& config, BehaviorVocab vocab, nn::Init init = nn::Init::kRandom);

  const SimulatorConfig& config() const { return config_; }
  const BehaviorVocab& vocab() const { return vocab_; }
  int states() const { return vocab_.size(); }
  int initial_state() const { return initial_state_; }
  const FeatureNorm& norm() const { return norm_; }
  void set_norm(FeatureNorm norm);
  nn::ParamStore& params() { return *store_; }
  const nn::ParamStore& params() const { return *store_; }

  // Rows are raw condition vectors.
  nn::Var transition_logits(nn::Tape& tape, const Matrix& features, const std::vector<int>& prev_states) const;
  // Canonical residual added to the vocabulary center of each row's state.
  nn::Var decoder_residual(nn::Tape& tape, const Matrix& features, const std::vector<int>& states) const;

  Matrix transition_probs(const Matrix& features, const std::vector<int>& prev_states) const;
  // Canonical coordinates, rows x 2*T_f.
  Matrix decode_canonical(const Matrix& features, const std::vector<int>& states) const;

  void save(const std::string& path) const;
  static SimulatorModel load(const std::string& path);

 private:
  Matrix net_input(const Matrix& features, const std::vector<int>& states) const;

  SimulatorConfig config_;
  BehaviorVocab vocab_;
  int initial_state_ = 0;
  FeatureNorm norm_;
  std::unique_ptr<nn::ParamStore> store_;
  nn::Mlp transition_;
  nn::Mlp decoder_;
};

std::vector<double> predict_transition(const SimulatorModel& model, const std::vector<double>& features, int prev_state);
// T_f world points: the decoded canonical segment mapped through `frame`.
std::vector<Vec2> decode_segment(const SimulatorModel& model, const std::vector<double>& features, int state,
                                 const SimilarityTransform& frame);

struct SimExample {
  std::vector<double> features;
  int prev_state = 0;
  int state = 0;
  std::vector<double> target;  // canonical segment, 2*T_f
};

std::vector<SimExample> build_simulator_dataset(const Scenario& scenario, const SceneLayout& layout,
                                                const NavGraph& graph, const BehaviorVocab& vocab,
                                                const SimulatorConfig& config);
// Segments of the scenario under the config's frame, control-point and length settings.
std::vector<MotionSegment> simulator_segments(const Scenario& scenario, const NavGraph& graph,
                                              const SimulatorConfig& config);
FeatureNorm fit_feature_norm(const std::vector<SimExample>& data);

struct SimTrainOptions {
  int epochs = 64;
  int batch = 2048;
  nn::AdamOptions adam;
};

struct SimTrainLog {
  std::vector<double> transition_loss;
  std::vector<double> decoder_loss;
  int rejected_steps = 0;
};

// Teacher-forced: cross-entropy on the next state given the true previous state, mean
// absolute error on the segment given the true next state.
SimTrainLog train_simulator(SimulatorModel& model, const std::vector<SimExample>& data,
                            const SimTrainOptions& options, Rng& rng);

struct LiveAgent {
  Agent record;  // trajectory so far
  Vec2 goal;
  Polyline path;
  double lifetime_frames = 0.0;
  int state = 0;
  std::vector<Vec2> plan;  // positions for frames plan_start, plan_start+1, ...
  int plan_start = 0;
};

struct SimState {
  int next_id = 0;
  std::vector<AgentStub> pending;
  std::vector<LiveAgent> live;
  std::vector<Agent> finished;

  std::vector<Vec2> live_positions() const;
  // Every agent so far as a scenario covering [0, total_frames).
  Scenario scenario(double fps, int total_frames, const std::string& scene_id) const;
};

struct WindowReport {
  int rows = 0;
  int spawned = 0;
  int arrived = 0;
  int timed_out = 0;
  int reprojected = 0;
};

// Shared agent bookkeeping for any stepping engine: path planning and lifetime cap.
LiveAgent make_live_agent(const AgentStub& stub, int id, const NavGraph& graph, const SimulatorConfig& config);
// Arrival or lifetime check after the agent has moved to `frame`.
enum class Departure { kNone, kArrived, kTimedOut };
Departure departure_check(const LiveAgent& agent, int frame, const SimulatorConfig& config);
// Moves `p` onto a traversable cell within 2 m; false when nothing is in reach.
bool keep_traversable(const NavGraph& graph, Vec2& p);

// Removes departing agents after frame `frame` and activates pending stubs due at it.
void depart_and_spawn(SimState& state, int frame, const NavGraph& graph, const SimulatorConfig& config,
                      WindowReport& report);

// Advances frames [window_start, window_start + window). Pending stubs whose spawn frame
// falls inside are activated; each agent re-decides every T_f frames from its spawn.
WindowReport step_window(SimState& state, const SimulatorModel& model, const NavGraph& graph,
                         const SceneLayout& layout, int window_start, int window, Rng& rng);

using EmitFn = std::function<std::vector<AgentStub>(int window_start, int count, std::span<const Vec2> occupied)>;
using StepFn = std::function<WindowReport(SimState& state, int window_start, int window)>;

struct RolloutOptions {
  int duration = 0;  // output frames
  int window = 50;
  bool warmup = true;  // half the first window's count, then discard the first window
  double fps = 5.0;
  std::string scene_id;
};

struct RolloutReport {
  int windows = 0;
  int emitted = 0;
  int dropped = 0;
  WindowReport totals;
};

// Emitter/simulator alternation: per window, sample the count from `population_prob`
// against the previous-frame population, emit, then step.
Scenario rollout(std::span<const double> population_prob, const RolloutOptions& options, const EmitFn& emit,
                 const StepFn& step, Rng& count_rng, RolloutReport* report = nullptr);

}  // namespace crowdes
