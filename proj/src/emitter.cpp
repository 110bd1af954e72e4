#include "crowdes/emitter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>

#include "crowdes/error.hpp"

namespace crowdes {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw InputError("diffusion needs at least one step");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
    throw InputError("beta schedule must satisfy 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  double prod = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double b = steps == 1 ? beta_start
                                : beta_start + (beta_end - beta_start) * i / static_cast<double>(steps - 1);
    s.beta_.push_back(b);
    prod *= 1.0 - b;
    s.alpha_bar_.push_back(prod);
  }
  return s;
}

std::vector<int> NoiseSchedule::sampling_timesteps(int count) const {
  const int total = steps();
  if (count <= 0 || count >= total) {
    std::vector<int> all(total);
    for (int i = 0; i < total; ++i) all[i] = total - i;
    return all;
  }
  std::vector<int> ts;
  for (int i = count; i >= 1; --i) {
    const int m = static_cast<int>(std::lround(static_cast<double>(i) * total / count));
    if (ts.empty() || m < ts.back()) ts.push_back(std::max(m, 1));
  }
  return ts;
}

int sample_population_count(std::span<const double> prob, int previous_count, Rng& rng) {
  if (prob.empty()) throw InputError("population distribution is empty");
  std::discrete_distribution<int> dist(prob.begin(), prob.end());
  return std::max(dist(rng) - previous_count, 0);
}

Matrix forward_diffuse(const Matrix& x0, int m, const NoiseSchedule& schedule, Rng& rng, Matrix* noise_out) {
  if (m < 1 || m > schedule.steps()) {
    throw InputError("diffusion step " + std::to_string(m) + " outside [1, " +
                     std::to_string(schedule.steps()) + "]");
  }
  Matrix noise(x0.rows(), x0.cols());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = standard_normal(rng);
  const double ab = schedule.alpha_bar(m);
  Matrix out = std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
  if (noise_out != nullptr) *noise_out = std::move(noise);
  return out;
}

Matrix ddim_update(const Matrix& x, const Matrix& eps_hat, double ab, double ab_prev) {
  const Matrix x0 = (x - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
  return std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * eps_hat;
}

Matrix ddim_sample(const NoiseSchedule& schedule, Matrix x, const std::vector<int>& timesteps,
                   const NoisePredictor& predict) {
  if (x.rows() == 0) return x;
  for (std::size_t i = 0; i < timesteps.size(); ++i) {
    const int m = timesteps[i];
    const int prev = i + 1 < timesteps.size() ? timesteps[i + 1] : 0;
    x = ddim_update(x, predict(x, m), schedule.alpha_bar(m), schedule.alpha_bar(prev));
  }
  return x;
}

namespace {

double to_unit(double v, double lo, double hi) { return hi > lo ? 2.0 * (v - lo) / (hi - lo) - 1.0 : 0.0; }
double from_unit(double u, double lo, double hi) { return lo + (u + 1.0) * 0.5 * (hi - lo); }

}  // namespace

std::array<double, kParamDims> ParamCodec::raw(const AgentStub& a, int window_start, int window) const {
  std::array<double, kParamDims> r{};
  for (int k = 0; k < kNumAgentKinds; ++k) r[k] = static_cast<int>(a.kind) == k ? 1.0 : -1.0;
  r[6] = a.pace;
  r[7] = 2.0 * (a.spawn_frame - window_start) / static_cast<double>(window) - 1.0;
  r[8] = to_unit(a.start.x, bounds.min.x, bounds.max.x);
  r[9] = to_unit(a.start.y, bounds.min.y, bounds.max.y);
  r[10] = to_unit(a.destination.x, bounds.min.x, bounds.max.x);
  r[11] = to_unit(a.destination.y, bounds.min.y, bounds.max.y);
  return r;
}

void ParamCodec::standardize(double* row) const {
  for (int d = 0; d < kParamDims; ++d) row[d] = (row[d] - mean[d]) / stddev[d];
}

AgentStub ParamCodec::decode(const double* row, int window_start, int window) const {
  std::array<double, kParamDims> r{};
  for (int d = 0; d < kParamDims; ++d) r[d] = mean[d] + stddev[d] * row[d];
  AgentStub a;
  a.kind = static_cast<AgentKind>(std::max_element(r.begin(), r.begin() + kNumAgentKinds) - r.begin());
  a.pace = std::clamp(r[6], pace_min, pace_max);
  const double frac = std::clamp((r[7] + 1.0) * 0.5, 0.0, 1.0);
  a.spawn_frame = window_start + std::min(static_cast<int>(std::lround(frac * window)), window - 1);
  const double eps = 1e-9;
  auto point = [&](double ux, double uy) {
    return Vec2{std::clamp(from_unit(ux, bounds.min.x, bounds.max.x), bounds.min.x, bounds.max.x - eps),
                std::clamp(from_unit(uy, bounds.min.y, bounds.max.y), bounds.min.y, bounds.max.y - eps)};
  };
  a.start = point(r[8], r[9]);
  a.destination = point(r[10], r[11]);
  return a;
}

Matrix encode_context(const SceneLayout& layout, std::span<const Vec2> occupied, int grid) {
  const GridRaster occupancy = occupancy_map(occupied, layout.geometry());
  const int w = layout.geometry().width_cells;
  const int h = layout.geometry().height_cells;
  Matrix ctx(grid * grid, kContextDims);
  for (int j = 0; j < grid; ++j) {
    const int y0 = std::min(j * h / grid, h - 1);
    const int y1 = std::max((j + 1) * h / grid, y0 + 1);
    for (int i = 0; i < grid; ++i) {
      const int x0 = std::min(i * w / grid, w - 1);
      const int x1 = std::max((i + 1) * w / grid, x0 + 1);
      std::array<double, kContextDims> f{};
      double cells = 0.0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const int cls = static_cast<int>(layout.segmentation.at(x, y));
          f[cls] += 1.0;
          f[7] += layout.appearance.at(x, y);
          f[8] += layout.density.at(x, y);
          f[9] = std::max(f[9], occupancy.at(x, y));
          cells += 1.0;
        }
      }
      for (int k = 0; k < 9; ++k) f[k] /= cells;
      const double cx = 2.0 * (i + 0.5) / grid - 1.0;
      const double cy = 2.0 * (j + 0.5) / grid - 1.0;
      f[10] = cx;
      f[11] = cy;
      f[12] = std::sin(std::numbers::pi * cx);
      f[13] = std::sin(std::numbers::pi * cy);
      for (int k = 0; k < kContextDims; ++k) ctx(j * grid + i, k) = f[k];
    }
  }
  return ctx;
}

namespace {

constexpr int kTimeDims = 16;

Matrix time_embedding(int m, int steps, Eigen::Index rows) {
  Matrix e(rows, kTimeDims);
  const double t = static_cast<double>(m) / steps;
  for (int k = 0; k < kTimeDims / 2; ++k) {
    const double freq = std::numbers::pi * std::pow(2.0, k);
    e.col(2 * k).setConstant(std::sin(freq * t));
    e.col(2 * k + 1).setConstant(std::cos(freq * t));
  }
  return e;
}

}  // namespace

EmitterModel::EmitterModel(const EmitterConfig& config, nn::Init init)
    : config_(config),
      schedule_(NoiseSchedule::linear(config.steps, config.beta_start, config.beta_end)),
      store_(std::make_unique<nn::ParamStore>()) {
  if (config.window < 1 || config.max_tokens < 1 || config.context_grid < 1) {
    throw InputError("emitter window, token cap and context grid must be positive");
  }
  codec_.mean.fill(0.0);
  codec_.stddev.fill(1.0);
  input_ = nn::Linear(*store_, "emitter.in", kParamDims + kTimeDims, config.model_dim, init, config.seed);
  for (int b = 0; b < config.blocks; ++b) {
    blocks_.emplace_back(*store_, "emitter.block" + std::to_string(b), config.model_dim, kContextDims,
                         config.heads, config.ffn_width, nn::Activation::kGelu, config.seed, init);
  }
  nn::NetSpec head;
  head.widths = {config.model_dim, config.head_width, kParamDims};
  head.seed = config.seed;
  head.init = init;
  head_ = nn::Mlp(*store_, "emitter.head", head);
}

nn::Var EmitterModel::predict_noise(nn::Tape& tape, const Matrix& x, int m, const Matrix& context) const {
  if (x.cols() != kParamDims) throw std::invalid_argument("emitter input must have 12 columns");
  const nn::Var in = tape.concat_cols(tape.constant(x), tape.constant(time_embedding(m, config_.steps, x.rows())));
  nn::Var h = input_.forward(tape, in);
  const nn::Var ctx = context.rows() > 0 ? tape.constant(context) : nn::Var{};
  for (const auto& block : blocks_) h = block.forward(tape, h, ctx);
  return head_.forward(tape, h);
}

Matrix EmitterModel::predict_noise(const Matrix& x, int m, const Matrix& context) const {
  if (x.rows() == 0) return Matrix(0, kParamDims);
  nn::Tape tape;
  return predict_noise(tape, x, m, context).value();
}

void EmitterModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write emitter checkpoint " + path);
  out << std::setprecision(17);
  const EmitterConfig& c = config_;
  out << "crowdes-emitter v1\n";
  out << "config " << c.steps << ' ' << c.model_dim << ' ' << c.blocks << ' ' << c.heads << ' '
      << c.ffn_width << ' ' << c.head_width << ' ' << c.max_tokens << ' ' << c.window << ' '
      << c.context_grid << ' ' << c.beta_start << ' ' << c.beta_end << ' ' << c.seed << '\n';
  out << "bounds " << codec_.bounds.min.x << ' ' << codec_.bounds.min.y << ' ' << codec_.bounds.max.x
      << ' ' << codec_.bounds.max.y << '\n';
  out << "pace " << codec_.pace_min << ' ' << codec_.pace_max << '\n';
  out << "mean";
  for (double v : codec_.mean) out << ' ' << v;
  out << "\nstd";
  for (double v : codec_.stddev) out << ' ' << v;
  out << '\n';
  nn::write_params(out, *store_);
}

EmitterModel EmitterModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("emitter checkpoint not found: " + path);
  std::string magic, version, tag;
  in >> magic >> version;
  if (magic != "crowdes-emitter" || version != "v1") throw InputError(path + ": not an emitter checkpoint");
  EmitterConfig c;
  in >> tag >> c.steps >> c.model_dim >> c.blocks >> c.heads >> c.ffn_width >> c.head_width >>
      c.max_tokens >> c.window >> c.context_grid >> c.beta_start >> c.beta_end >> c.seed;
  if (!in || tag != "config") throw InputError(path + ": malformed config line");
  EmitterModel model(c, nn::Init::kZero);
  ParamCodec& codec = model.codec_;
  in >> tag >> codec.bounds.min.x >> codec.bounds.min.y >> codec.bounds.max.x >> codec.bounds.max.y;
  if (!in || tag != "bounds") throw InputError(path + ": malformed bounds line");
  in >> tag >> codec.pace_min >> codec.pace_max;
  if (!in || tag != "pace") throw InputError(path + ": malformed pace line");
  in >> tag;
  for (double& v : codec.mean) in >> v;
  if (!in || tag != "mean") throw InputError(path + ": malformed mean line");
  in >> tag;
  for (double& v : codec.stddev) in >> v;
  if (!in || tag != "std") throw InputError(path + ": malformed std line");
  nn::read_params(in, *model.store_, path);
  return model;
}

Matrix denoise_step(const EmitterModel& model, const Matrix& x, int m, int m_prev, const Matrix& context) {
  if (x.rows() == 0) return x;
  const NoiseSchedule& s = model.schedule();
  return ddim_update(x, model.predict_noise(x, m, context), s.alpha_bar(m), s.alpha_bar(m_prev));
}

EmitResult emit_agents(const EmitterModel& model, const SceneLayout& layout, const NavGraph& graph,
                       std::span<const Vec2> occupied, int count, const EmitOptions& options, Rng& rng) {
  EmitResult result;
  if (count <= 0) return result;
  const Matrix ctx = encode_context(layout, occupied, model.config().context_grid);
  const std::vector<int> timesteps = model.schedule().sampling_timesteps(options.sampling_steps);
  const int window = options.window > 0 ? options.window : model.config().window;
  int remaining = count;
  while (remaining > 0) {
    const int n = std::min(remaining, model.config().max_tokens);
    remaining -= n;
    Matrix x(n, kParamDims);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
    // Row-major copies keep each agent's parameters contiguous for decoding.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out =
        ddim_sample(model.schedule(), x, timesteps,
                    [&](const Matrix& xm, int m) { return model.predict_noise(xm, m, ctx); });
    for (int r = 0; r < n; ++r) {
      AgentStub a = model.codec().decode(out.row(r).data(), options.window_start, window);
      const auto start = graph.project(a.start, options.projection_radius);
      const auto dest = graph.project(a.destination, options.projection_radius);
      if (!start || !dest) {
        ++result.dropped;
        continue;
      }
      a.start = *start;
      a.destination = *dest;
      result.agents.push_back(a);
    }
  }
  return result;
}

namespace {

AgentStub stub_of(const Agent& a) {
  return AgentStub{a.kind, a.pace, a.spawn_frame, a.start(), a.destination()};
}

}  // namespace

ParamCodec fit_codec(const Scenario& scenario, const SceneLayout& layout, int window) {
  if (scenario.agents.empty()) throw InputError("cannot fit emitter statistics without agents");
  ParamCodec codec;
  codec.bounds = layout.geometry().bounds();
  codec.pace_min = 1e300;
  codec.pace_max = 0.0;
  std::array<double, kParamDims> sum{}, sum_sq{};
  for (const Agent& a : scenario.agents) {
    codec.pace_min = std::min(codec.pace_min, a.pace);
    codec.pace_max = std::max(codec.pace_max, a.pace);
    const auto r = codec.raw(stub_of(a), (a.spawn_frame / window) * window, window);
    for (int d = 0; d < kParamDims; ++d) {
      sum[d] += r[d];
      sum_sq[d] += r[d] * r[d];
    }
  }
  const double n = static_cast<double>(scenario.agents.size());
  for (int d = 0; d < kParamDims; ++d) {
    codec.mean[d] = sum[d] / n;
    const double var = std::max(sum_sq[d] / n - codec.mean[d] * codec.mean[d], 0.0);
    codec.stddev[d] = std::max(std::sqrt(var), 0.05);
  }
  return codec;
}

std::vector<EmitterExample> build_emitter_dataset(const Scenario& scenario, const SceneLayout& layout,
                                                  int window, int context_grid, const ParamCodec& codec) {
  std::vector<EmitterExample> data;
  for (const Window& w : window_scenario(scenario, window)) {
    if (w.spawned.empty()) continue;
    std::vector<Vec2> occupied;
    for (int idx : w.alive_at_start) occupied.push_back(scenario.agents[idx].position_at(w.start - 1));
    EmitterExample ex;
    ex.context = encode_context(layout, occupied, context_grid);
    ex.params.resize(static_cast<Eigen::Index>(w.spawned.size()), kParamDims);
    for (std::size_t i = 0; i < w.spawned.size(); ++i) {
      const auto r = codec.raw(stub_of(scenario.agents[w.spawned[i]]), w.start, window);
      for (int d = 0; d < kParamDims; ++d) ex.params(static_cast<Eigen::Index>(i), d) = r[d];
    }
    data.push_back(std::move(ex));
  }
  return data;
}

TrainLog train_emitter(EmitterModel& model, const std::vector<EmitterExample>& dataset,
                       const TrainOptions& options, Rng& rng) {
  std::size_t usable = 0;
  for (const auto& ex : dataset) usable += ex.params.rows() > 0 ? 1 : 0;
  if (usable == 0) throw InputError("emitter training needs at least one window with a spawned agent");
  TrainLog log;
  nn::ParamStore& store = model.params();
  nn::AdamState adam;
  const int max_tokens = model.config().max_tokens;
  const int steps = model.schedule().steps();
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    double token_sum = 0.0;
    double pending = 0.0;
    store.zero_grad();
    auto flush = [&]() {
      if (pending == 0.0) return;
      for (auto& p : store.params()) p.grad /= pending;
      if (!nn::adam_step(store, adam, options.adam).applied) ++log.rejected_steps;
      store.zero_grad();
      pending = 0.0;
    };
    for (std::size_t idx : order) {
      const EmitterExample& ex = dataset[idx];
      if (ex.params.rows() == 0) continue;
      std::vector<Eigen::Index> rows(static_cast<std::size_t>(ex.params.rows()));
      std::iota(rows.begin(), rows.end(), 0);
      if (static_cast<int>(rows.size()) > max_tokens) {
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(static_cast<std::size_t>(max_tokens));
      }
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> x0(
          static_cast<Eigen::Index>(rows.size()), kParamDims);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        x0.row(static_cast<Eigen::Index>(i)) = ex.params.row(rows[i]);
        model.codec().standardize(x0.row(static_cast<Eigen::Index>(i)).data());
      }
      const int m = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(steps));
      Matrix noise;
      const Matrix xm = forward_diffuse(x0, m, model.schedule(), rng, &noise);
      nn::Tape tape(&store);
      const nn::Var loss = tape.mse(model.predict_noise(tape, xm, m, ex.context), noise);
      const double n = static_cast<double>(rows.size());
      tape.backward(loss, Matrix::Constant(1, 1, n));
      loss_sum += loss.value()(0, 0) * n;
      token_sum += n;
      pending += n;
      if (pending >= options.batch) flush();
    }
    flush();
    log.epoch_loss.push_back(loss_sum / token_sum);
  }
  return log;
}

void AgentPrior::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write agent prior " + path);
  out << std::setprecision(17) << "kinds";
  for (double f : kind_freq) out << ' ' << f;
  out << "\npaces " << paces.size();
  for (double p : paces) out << ' ' << p;
  out << '\n';
}

AgentPrior AgentPrior::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("agent prior not found: " + path);
  AgentPrior prior;
  std::string tag;
  in >> tag;
  for (double& f : prior.kind_freq) in >> f;
  if (!in || tag != "kinds") throw InputError(path + ": malformed kinds line");
  std::size_t n = 0;
  in >> tag >> n;
  if (!in || tag != "paces") throw InputError(path + ": malformed paces line");
  prior.paces.resize(n);
  for (double& p : prior.paces) in >> p;
  if (!in) throw InputError(path + ": truncated paces");
  return prior;
}

AgentPrior derive_agent_prior(const Scenario& scenario) {
  AgentPrior prior;
  for (const Agent& a : scenario.agents) {
    prior.kind_freq[static_cast<int>(a.kind)] += 1.0;
    prior.paces.push_back(a.pace);
  }
  const double n = static_cast<double>(scenario.agents.size());
  if (n > 0) {
    for (double& f : prior.kind_freq) f /= n;
  }
  return prior;
}

EmitResult histogram_emit(const GridRaster& weights, const NavGraph& graph, const AgentPrior& prior,
                          int count, int window_start, int window, Rng& rng, double projection_radius) {
  EmitResult result;
  if (count <= 0) return result;
  std::vector<double> mass = weights.values();
  if (std::all_of(mass.begin(), mass.end(), [](double v) { return v <= 0.0; })) {
    mass = graph.raster().values();
  }
  for (double& v : mass) v = std::max(v, 0.0);
  if (std::all_of(mass.begin(), mass.end(), [](double v) { return v <= 0.0; })) {
    throw InputError("no appearance mass and no traversable cells to emit from");
  }
  std::discrete_distribution<std::size_t> cells(mass.begin(), mass.end());
  const bool any_kind = std::any_of(prior.kind_freq.begin(), prior.kind_freq.end(), [](double f) { return f > 0; });
  std::discrete_distribution<int> kinds(prior.kind_freq.begin(), prior.kind_freq.end());
  const int w = weights.width();
  const double cs = weights.cell_size();
  auto sample_point = [&]() {
    const std::size_t idx = cells(rng);
    const int cx = static_cast<int>(idx % static_cast<std::size_t>(w));
    const int cy = static_cast<int>(idx / static_cast<std::size_t>(w));
    const double u = uniform01(rng);
    const double v = uniform01(rng);
    return weights.origin() + Vec2{(cx + u) * cs, (cy + v) * cs};
  };
  for (int i = 0; i < count; ++i) {
    AgentStub a;
    a.kind = any_kind ? static_cast<AgentKind>(kinds(rng)) : AgentKind::kPedestrian;
    a.pace = prior.paces.empty() ? 1.0 : prior.paces[rng() % prior.paces.size()];
    a.spawn_frame = window_start + std::min(static_cast<int>(uniform01(rng) * window), window - 1);
    const auto start = graph.project(sample_point(), projection_radius);
    const auto dest = graph.project(sample_point(), projection_radius);
    if (!start || !dest) {
      ++result.dropped;
      continue;
    }
    a.start = *start;
    a.destination = *dest;
    result.agents.push_back(a);
  }
  return result;
}

}  // namespace crowdes
