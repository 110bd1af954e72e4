#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "crowdes/nav_mesh.hpp"
#include "crowdes/nn.hpp"
#include "crowdes/rng.hpp"
#include "crowdes/scene_layout.hpp"
#include "crowdes/trajectory.hpp"

namespace crowdes {

using nn::Matrix;

// Linear beta schedule; alpha_bar(0) == 1 by convention.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;
  static NoiseSchedule linear(int steps, double beta_start = 1e-4, double beta_end = 0.02);

  int steps() const { return static_cast<int>(beta_.size()); }
  double beta(int m) const { return beta_.at(m - 1); }
  double alpha_bar(int m) const { return m == 0 ? 1.0 : alpha_bar_.at(m - 1); }
  // Descending sampling timesteps M = t_k > ... > t_1, evenly spaced; `count` <= 0 means all.
  std::vector<int> sampling_timesteps(int count) const;

 private:
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
};

// max(N_P - N_prev, 0) with N_P ~ Categorical(prob).
int sample_population_count(std::span<const double> prob, int previous_count, Rng& rng);

// Draw from N(sqrt(abar_m) x0, (1 - abar_m) I). `noise_out` receives the standard normal draw.
Matrix forward_diffuse(const Matrix& x0, int m, const NoiseSchedule& schedule, Rng& rng,
                       Matrix* noise_out = nullptr);

// Deterministic (eta = 0) DDIM update from alpha_bar `ab` to `ab_prev`.
Matrix ddim_update(const Matrix& x, const Matrix& eps_hat, double ab, double ab_prev);

using NoisePredictor = std::function<Matrix(const Matrix& x, int m)>;
// Runs the reverse chain from x over `timesteps` (descending); each step moves to the next entry, the last to 0.
Matrix ddim_sample(const NoiseSchedule& schedule, Matrix x, const std::vector<int>& timesteps,
                   const NoisePredictor& predict);

// Agent parameter vector layout: 6 kind logits, pace, spawn offset, start xy, destination xy.
inline constexpr int kParamDims = 12;

struct AgentStub {
  AgentKind kind = AgentKind::kPedestrian;
  double pace = 1.0;
  int spawn_frame = 0;
  Vec2 start;
  Vec2 destination;
};

// Maps agents to raw parameter rows (kinds as +-1 logits, spawn offset and coordinates
// in [-1,1]) and standardizes them with per-dimension training statistics.
struct ParamCodec {
  Bounds bounds;
  double pace_min = 0.0;
  double pace_max = 0.0;
  std::array<double, kParamDims> mean{};
  std::array<double, kParamDims> stddev{};

  std::array<double, kParamDims> raw(const AgentStub& a, int window_start, int window) const;
  // Standardized row -> stub; pace clamped to [pace_min, pace_max], coordinates clamped to bounds.
  AgentStub decode(const double* row, int window_start, int window) const;
  void standardize(double* row) const;
};

// 16x16 context tokens: segmentation class fractions, appearance, density, occupancy and
// four positional terms.
inline constexpr int kContextDims = 14;
Matrix encode_context(const SceneLayout& layout, std::span<const Vec2> occupied, int grid = 16);

struct EmitterConfig {
  int steps = 50;  // M
  int model_dim = 64;
  int blocks = 2;
  int heads = 2;
  int ffn_width = 128;
  int head_width = 128;
  int max_tokens = 32;
  int window = 50;  // T_w
  int context_grid = 16;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::uint64_t seed = 0;
};

class EmitterModel {
 public:
  explicit EmitterModel(const EmitterConfig& config, nn::Init init = nn::Init::kRandom);

  const EmitterConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  ParamCodec& codec() { return codec_; }
  const ParamCodec& codec() const { return codec_; }
  nn::ParamStore& params() { return *store_; }
  const nn::ParamStore& params() const { return *store_; }

  // Noise prediction for every agent row of `x` (standardized parameters) at step m.
  nn::Var predict_noise(nn::Tape& tape, const Matrix& x, int m, const Matrix& context) const;
  Matrix predict_noise(const Matrix& x, int m, const Matrix& context) const;

  void save(const std::string& path) const;
  static EmitterModel load(const std::string& path);

 private:
  EmitterConfig config_;
  NoiseSchedule schedule_;
  ParamCodec codec_;
  std::unique_ptr<nn::ParamStore> store_;
  nn::Linear input_;
  std::vector<nn::SetAttentionBlock> blocks_;
  nn::Mlp head_;
};

// One DDIM step from m to m_prev using the model's noise prediction for all rows jointly.
Matrix denoise_step(const EmitterModel& model, const Matrix& x, int m, int m_prev, const Matrix& context);

struct EmitResult {
  std::vector<AgentStub> agents;
  int dropped = 0;  // agents whose start or destination had no traversable cell within 2 m
};

struct EmitOptions {
  int window_start = 0;
  int sampling_steps = 0;  // 0: all M steps
  int window = 0;          // 0: the model's training window
  double projection_radius = 2.0;
};

EmitResult emit_agents(const EmitterModel& model, const SceneLayout& layout, const NavGraph& graph,
                       std::span<const Vec2> occupied, int count, const EmitOptions& options, Rng& rng);

struct EmitterExample {
  Matrix params;   // raw rows, n x kParamDims
  Matrix context;  // kept per window
};

std::vector<EmitterExample> build_emitter_dataset(const Scenario& scenario, const SceneLayout& layout,
                                                  int window, int context_grid, const ParamCodec& codec);
// Bounds from the layout, pace range and per-dimension statistics from the data.
ParamCodec fit_codec(const Scenario& scenario, const SceneLayout& layout, int window);

struct TrainOptions {
  int epochs = 256;
  int batch = 512;  // agent tokens accumulated per optimizer step
  nn::AdamOptions adam;
};

struct TrainLog {
  std::vector<double> epoch_loss;
  int rejected_steps = 0;
};

// Windows with more than max_tokens spawns are subsampled. Throws InputError when no
// window has a spawned agent.
TrainLog train_emitter(EmitterModel& model, const std::vector<EmitterExample>& dataset,
                       const TrainOptions& options, Rng& rng);

// Empirical kind frequencies and paces from training data.
struct AgentPrior {
  std::array<double, kNumAgentKinds> kind_freq{};
  std::vector<double> paces;

  void save(const std::string& path) const;
  static AgentPrior load(const std::string& path);
};
AgentPrior derive_agent_prior(const Scenario& scenario);

// Starts and destinations drawn in proportion to `weights` (usually the appearance map),
// uniformly within the chosen cell. An all-zero weight raster falls back to uniform over
// traversable cells.
EmitResult histogram_emit(const GridRaster& weights, const NavGraph& graph, const AgentPrior& prior,
                          int count, int window_start, int window, Rng& rng,
                          double projection_radius = 2.0);

}  // namespace crowdes
