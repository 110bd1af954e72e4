#include "crowdes/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "crowdes/error.hpp"

namespace crowdes {

Ablation Ablation::parse(std::string_view list) {
  Ablation a;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = std::min(list.find(',', pos), list.size());
    std::string_view item = list.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item == "no-layout") {
      a.no_layout = true;
    } else if (item == "no-navmesh") {
      a.no_navmesh = true;
    } else if (item == "no-social") {
      a.no_social = true;
    } else if (item == "no-switching") {
      a.no_switching = true;
    } else if (item == "no-diffusion") {
      a.no_diffusion = true;
    } else if (!item.empty() && item != "none") {
      throw InputError("unknown ablation '" + std::string(item) + "'");
    }
    pos = comma + 1;
  }
  return a;
}

std::string Ablation::to_string() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(no_layout, "no-layout");
  add(no_navmesh, "no-navmesh");
  add(no_social, "no-social");
  add(no_switching, "no-switching");
  add(no_diffusion, "no-diffusion");
  return out.empty() ? "none" : out;
}

namespace {

constexpr int kCropChannels = kNumSegClasses + 1;

int pooled_cells(const SimulatorConfig& c) {
  if (c.crop_pool < 1 || c.crop_cells % c.crop_pool != 0) {
    throw InputError("crop size must be a multiple of the pooling block");
  }
  return c.crop_cells / c.crop_pool;
}

}  // namespace

int SimulatorConfig::condition_dims() const {
  const int g = pooled_cells(*this);
  return kNumAgentKinds + 1 + 2 + 2 + 2 + 2 * history_frames + 5 * neighbors + g * g * kCropChannels;
}

std::vector<Vec2> history_window(const std::vector<Vec2>& traj, int k, int history_frames) {
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(history_frames));
  for (int j = 1; j <= history_frames; ++j) out.push_back(traj[static_cast<std::size_t>(std::max(k - j, 0))]);
  return out;
}

Vec2 history_velocity(const std::vector<Vec2>& traj, int k, int history_frames, double fps) {
  const int from = std::max(k - history_frames, 0);
  if (k == from) return {};
  return (traj[static_cast<std::size_t>(k)] - traj[static_cast<std::size_t>(from)]) * (fps / (k - from));
}

std::vector<double> build_conditions(const ConditionInput& in, const SceneLayout& layout,
                                     const SimulatorConfig& config) {
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(config.condition_dims()));
  const SimilarityTransform& frame = in.frame;
  for (int k = 0; k < kNumAgentKinds; ++k) f.push_back(static_cast<int>(in.kind) == k ? 1.0 : 0.0);
  f.push_back(in.pace);
  auto push = [&](const Vec2& v) {
    f.push_back(v.x);
    f.push_back(v.y);
  };
  push(frame.rotate_to_canonical(in.destination - in.position));
  push(frame.rotate_to_canonical(in.control - in.position));
  push(frame.rotate_to_canonical(in.velocity));
  for (int j = 0; j < config.history_frames; ++j) {
    const Vec2 h = j < static_cast<int>(in.history.size()) ? in.history[static_cast<std::size_t>(j)] : in.position;
    push(frame.rotate_to_canonical(h - in.position));
  }

  std::vector<std::pair<double, int>> near;
  if (!config.ablation.no_social) {
    for (int i = 0; i < static_cast<int>(in.others.size()); ++i) {
      const double d = distance(in.others[static_cast<std::size_t>(i)].position, in.position);
      if (d <= config.neighbor_radius) near.emplace_back(d, i);
    }
    std::sort(near.begin(), near.end());
  }
  for (int j = 0; j < config.neighbors; ++j) {
    if (j < static_cast<int>(near.size())) {
      const Neighbor& n = in.others[static_cast<std::size_t>(near[static_cast<std::size_t>(j)].second)];
      push(frame.rotate_to_canonical(n.position - in.position));
      push(frame.rotate_to_canonical(n.velocity - in.velocity));
      f.push_back(1.0);
    } else {
      for (int z = 0; z < 5; ++z) f.push_back(0.0);
    }
  }

  const int g = pooled_cells(config);
  std::vector<double> crop(static_cast<std::size_t>(g * g * kCropChannels), 0.0);
  if (!config.ablation.no_layout) {
    const double half = config.crop_cells * 0.5;
    const double inv = 1.0 / (config.crop_pool * config.crop_pool);
    for (int v = 0; v < config.crop_cells; ++v) {
      for (int u = 0; u < config.crop_cells; ++u) {
        const Vec2 offset{(u + 0.5 - half) * config.crop_cell_size, (v + 0.5 - half) * config.crop_cell_size};
        const Vec2 world = in.position + frame.rotate_to_world(offset);
        const Cell c = layout.segmentation.world_to_cell(world);
        if (!layout.segmentation.contains(c)) continue;
        const std::size_t base =
            static_cast<std::size_t>(((v / config.crop_pool) * g + u / config.crop_pool) * kCropChannels);
        crop[base + static_cast<std::size_t>(layout.segmentation.at(c))] += inv;
        crop[base + kNumSegClasses] += layout.density.at(c) * inv;
      }
    }
  }
  f.insert(f.end(), crop.begin(), crop.end());
  return f;
}

SimulatorModel::SimulatorModel(const SimulatorConfig& config, BehaviorVocab vocab, nn::Init init)
    : config_(config), vocab_(std::move(vocab)), store_(std::make_unique<nn::ParamStore>()) {
  if (vocab_.size() < 1) throw InputError("simulator needs a vocabulary with at least one state");
  if (vocab_.segment_frames != config_.segment_frames) {
    throw InputError("vocabulary segment length does not match the simulator configuration");
  }
  initial_state_ = assign_state(straight_segment(config_.segment_frames), vocab_);
  const int in = config_.condition_dims() + vocab_.size();
  nn::NetSpec t;
  t.widths = {in, config_.hidden, config_.hidden, vocab_.size()};
  t.seed = config_.seed;
  t.init = init;
  transition_ = nn::Mlp(*store_, "sim.transition", t);
  nn::NetSpec d = t;
  d.widths.back() = 2 * config_.segment_frames;
  decoder_ = nn::Mlp(*store_, "sim.decoder", d);
}

void SimulatorModel::set_norm(FeatureNorm norm) {
  const auto dims = static_cast<std::size_t>(config_.condition_dims());
  if (norm.mean.size() != dims || norm.stddev.size() != dims) {
    throw InputError("feature normalization has the wrong width");
  }
  norm_ = std::move(norm);
}

Matrix SimulatorModel::net_input(const Matrix& features, const std::vector<int>& states) const {
  const int dims = config_.condition_dims();
  if (features.cols() != dims) throw std::invalid_argument("condition width mismatch");
  if (static_cast<Eigen::Index>(states.size()) != features.rows()) {
    throw std::invalid_argument("one state per feature row required");
  }
  Matrix x = Matrix::Zero(features.rows(), dims + vocab_.size());
  x.leftCols(dims) = features;
  if (!norm_.mean.empty()) {
    for (int c = 0; c < dims; ++c) {
      x.col(c) = (x.col(c).array() - norm_.mean[static_cast<std::size_t>(c)]) / norm_.stddev[static_cast<std::size_t>(c)];
    }
  }
  for (std::size_t r = 0; r < states.size(); ++r) {
    if (states[r] < 0 || states[r] >= vocab_.size()) throw std::invalid_argument("behavior state out of range");
    x(static_cast<Eigen::Index>(r), dims + states[r]) = 1.0;
  }
  return x;
}

nn::Var SimulatorModel::transition_logits(nn::Tape& tape, const Matrix& features,
                                          const std::vector<int>& prev_states) const {
  return transition_.forward(tape, tape.constant(net_input(features, prev_states)));
}

nn::Var SimulatorModel::decoder_residual(nn::Tape& tape, const Matrix& features,
                                         const std::vector<int>& states) const {
  return decoder_.forward(tape, tape.constant(net_input(features, states)));
}

Matrix SimulatorModel::transition_probs(const Matrix& features, const std::vector<int>& prev_states) const {
  nn::Tape tape;
  return tape.softmax_rows(transition_logits(tape, features, prev_states)).value();
}

Matrix SimulatorModel::decode_canonical(const Matrix& features, const std::vector<int>& states) const {
  nn::Tape tape;
  Matrix out = decoder_residual(tape, features, states).value();
  for (std::size_t r = 0; r < states.size(); ++r) {
    const auto& center = vocab_.centers[static_cast<std::size_t>(states[r])];
    for (std::size_t c = 0; c < center.size(); ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) += center[c];
  }
  return out;
}

void SimulatorModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write simulator checkpoint " + path);
  out << std::setprecision(17);
  const SimulatorConfig& c = config_;
  out << "crowdes-simulator v1\n";
  out << "config " << c.segment_frames << ' ' << c.history_frames << ' ' << c.neighbors << ' '
      << c.neighbor_radius << ' ' << c.crop_cells << ' ' << c.crop_cell_size << ' ' << c.crop_pool << ' '
      << c.hidden << ' ' << c.fps << ' ' << c.horizon_s << ' '
      << (c.scale_mode == ScaleMode::kPace ? "pace" : "control") << ' ' << c.arrival_radius << ' '
      << c.lifetime_factor << ' ' << c.seed << '\n';
  out << "ablation " << c.ablation.to_string() << '\n';
  out << "vocab " << vocab_.size() << ' ' << vocab_.segment_frames << '\n';
  for (const auto& center : vocab_.centers) {
    for (std::size_t i = 0; i < center.size(); ++i) out << (i ? " " : "") << center[i];
    out << '\n';
  }
  out << "norm " << norm_.mean.size() << '\n';
  for (double v : norm_.mean) out << v << ' ';
  out << '\n';
  for (double v : norm_.stddev) out << v << ' ';
  out << '\n';
  nn::write_params(out, *store_);
}

SimulatorModel SimulatorModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("simulator checkpoint not found: " + path);
  std::string magic, version, tag, mode, ablation;
  in >> magic >> version;
  if (magic != "crowdes-simulator" || version != "v1") throw InputError(path + ": not a simulator checkpoint");
  SimulatorConfig c;
  in >> tag >> c.segment_frames >> c.history_frames >> c.neighbors >> c.neighbor_radius >> c.crop_cells >>
      c.crop_cell_size >> c.crop_pool >> c.hidden >> c.fps >> c.horizon_s >> mode >> c.arrival_radius >>
      c.lifetime_factor >> c.seed;
  if (!in || tag != "config") throw InputError(path + ": malformed config line");
  c.scale_mode = mode == "pace" ? ScaleMode::kPace : ScaleMode::kControlDistance;
  in >> tag >> ablation;
  if (!in || tag != "ablation") throw InputError(path + ": malformed ablation line");
  c.ablation = Ablation::parse(ablation);
  BehaviorVocab vocab;
  int states = 0;
  in >> tag >> states >> vocab.segment_frames;
  if (!in || tag != "vocab" || states < 1) throw InputError(path + ": malformed vocab line");
  vocab.centers.assign(static_cast<std::size_t>(states),
                       std::vector<double>(static_cast<std::size_t>(2 * vocab.segment_frames)));
  for (auto& center : vocab.centers) {
    for (double& v : center) in >> v;
  }
  std::size_t dims = 0;
  in >> tag >> dims;
  if (!in || tag != "norm") throw InputError(path + ": malformed norm line");
  FeatureNorm norm;
  norm.mean.resize(dims);
  norm.stddev.resize(dims);
  for (double& v : norm.mean) in >> v;
  for (double& v : norm.stddev) in >> v;
  if (!in) throw InputError(path + ": truncated normalization statistics");
  SimulatorModel model(c, std::move(vocab), nn::Init::kZero);
  if (dims > 0) model.set_norm(std::move(norm));
  nn::read_params(in, *model.store_, path);
  return model;
}

namespace {

Matrix row_matrix(const std::vector<double>& v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

}  // namespace

std::vector<double> predict_transition(const SimulatorModel& model, const std::vector<double>& features,
                                       int prev_state) {
  const Matrix p = model.transition_probs(row_matrix(features), {prev_state});
  return std::vector<double>(p.data(), p.data() + p.size());
}

std::vector<Vec2> decode_segment(const SimulatorModel& model, const std::vector<double>& features, int state,
                                 const SimilarityTransform& frame) {
  const Matrix c = model.decode_canonical(row_matrix(features), {state});
  std::vector<Vec2> out;
  for (int j = 0; j < model.config().segment_frames; ++j) out.push_back(frame.to_world({c(0, 2 * j), c(0, 2 * j + 1)}));
  return out;
}

std::vector<MotionSegment> simulator_segments(const Scenario& scenario, const NavGraph& graph,
                                              const SimulatorConfig& config) {
  SegmentOptions opts;
  opts.segment_frames = config.segment_frames;
  opts.frame = config.frame_options();
  opts.use_navmesh = !config.ablation.no_navmesh;
  return segment_and_normalize(scenario, &graph, opts);
}

std::vector<SimExample> build_simulator_dataset(const Scenario& scenario, const SceneLayout& layout,
                                                const NavGraph& graph, const BehaviorVocab& vocab,
                                                const SimulatorConfig& config) {
  const std::vector<MotionSegment> segments = simulator_segments(scenario, graph, config);
  std::vector<std::vector<int>> alive(static_cast<std::size_t>(std::max(scenario.total_frames, 0)));
  for (int i = 0; i < static_cast<int>(scenario.agents.size()); ++i) {
    const Agent& a = scenario.agents[static_cast<std::size_t>(i)];
    for (int t = a.spawn_frame; t <= a.end_frame; ++t) alive[static_cast<std::size_t>(t)].push_back(i);
  }
  const int initial = assign_state(straight_segment(config.segment_frames), vocab);
  std::vector<SimExample> data;
  int last_agent = -1;
  int last_frame = 0;
  int last_state = initial;
  for (const MotionSegment& seg : segments) {
    const Agent& agent = scenario.agents[static_cast<std::size_t>(seg.agent_index)];
    const int t = seg.origin_frame;
    const int k = t - agent.spawn_frame;
    SimExample ex;
    ex.prev_state = (seg.agent_index == last_agent && t == last_frame + config.segment_frames) ? last_state : initial;
    ex.target = seg.flat();
    ex.state = assign_state(ex.target, vocab);
    ConditionInput in;
    in.kind = agent.kind;
    in.pace = agent.pace;
    in.position = agent.trajectory[static_cast<std::size_t>(k)];
    in.destination = agent.destination();
    in.control = seg.control;
    in.frame = seg.transform;
    in.history = history_window(agent.trajectory, k, config.history_frames);
    in.velocity = history_velocity(agent.trajectory, k, config.history_frames, config.fps);
    for (int j : alive[static_cast<std::size_t>(t)]) {
      if (j == seg.agent_index) continue;
      const Agent& o = scenario.agents[static_cast<std::size_t>(j)];
      const int ok = t - o.spawn_frame;
      in.others.push_back({o.trajectory[static_cast<std::size_t>(ok)],
                           history_velocity(o.trajectory, ok, config.history_frames, config.fps)});
    }
    ex.features = build_conditions(in, layout, config);
    last_agent = seg.agent_index;
    last_frame = t;
    last_state = ex.state;
    data.push_back(std::move(ex));
  }
  return data;
}

FeatureNorm fit_feature_norm(const std::vector<SimExample>& data) {
  if (data.empty()) throw InputError("cannot fit feature statistics on an empty dataset");
  const std::size_t dims = data.front().features.size();
  FeatureNorm norm;
  norm.mean.assign(dims, 0.0);
  norm.stddev.assign(dims, 0.0);
  for (const auto& ex : data) {
    for (std::size_t i = 0; i < dims; ++i) norm.mean[i] += ex.features[i];
  }
  const double n = static_cast<double>(data.size());
  for (double& m : norm.mean) m /= n;
  for (const auto& ex : data) {
    for (std::size_t i = 0; i < dims; ++i) {
      const double d = ex.features[i] - norm.mean[i];
      norm.stddev[i] += d * d;
    }
  }
  for (double& s : norm.stddev) s = std::max(std::sqrt(s / n), 0.1);
  return norm;
}

SimTrainLog train_simulator(SimulatorModel& model, const std::vector<SimExample>& data,
                            const SimTrainOptions& options, Rng& rng) {
  if (data.empty()) throw InputError("simulator training needs at least one segment");
  SimTrainLog log;
  nn::ParamStore& store = model.params();
  nn::AdamState adam;
  const int dims = model.config().condition_dims();
  const int width = 2 * model.config().segment_frames;
  const int batch = std::max(options.batch, 1);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double ce_sum = 0.0;
    double mae_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch));
      const auto rows = static_cast<Eigen::Index>(end - start);
      Matrix features(rows, dims);
      Matrix residual(rows, width);
      std::vector<int> prev, next;
      for (Eigen::Index r = 0; r < rows; ++r) {
        const SimExample& ex = data[order[start + static_cast<std::size_t>(r)]];
        for (int c = 0; c < dims; ++c) features(r, c) = ex.features[static_cast<std::size_t>(c)];
        const auto& center = model.vocab().centers[static_cast<std::size_t>(ex.state)];
        for (int c = 0; c < width; ++c) {
          residual(r, c) = ex.target[static_cast<std::size_t>(c)] - center[static_cast<std::size_t>(c)];
        }
        prev.push_back(ex.prev_state);
        next.push_back(ex.state);
      }
      store.zero_grad();
      nn::Tape tape(&store);
      const nn::Var ce = tape.cross_entropy(model.transition_logits(tape, features, prev), next);
      const nn::Var mae = tape.mae(model.decoder_residual(tape, features, next), residual);
      tape.backward(tape.add(ce, mae));
      if (!nn::adam_step(store, adam, options.adam).applied) ++log.rejected_steps;
      ce_sum += ce.value()(0, 0) * static_cast<double>(rows);
      mae_sum += mae.value()(0, 0) * static_cast<double>(rows);
    }
    log.transition_loss.push_back(ce_sum / static_cast<double>(data.size()));
    log.decoder_loss.push_back(mae_sum / static_cast<double>(data.size()));
  }
  return log;
}

std::vector<Vec2> SimState::live_positions() const {
  std::vector<Vec2> out;
  out.reserve(live.size());
  for (const LiveAgent& a : live) out.push_back(a.record.trajectory.back());
  return out;
}

Scenario SimState::scenario(double fps, int total_frames, const std::string& scene_id) const {
  Scenario s;
  s.fps = fps;
  s.total_frames = total_frames;
  s.scene_id = scene_id;
  s.agents = finished;
  for (const LiveAgent& a : live) s.agents.push_back(a.record);
  std::sort(s.agents.begin(), s.agents.end(), [](const Agent& a, const Agent& b) { return a.id < b.id; });
  return s;
}

LiveAgent make_live_agent(const AgentStub& stub, int id, const NavGraph& graph, const SimulatorConfig& config) {
  LiveAgent a;
  a.record.id = id;
  a.record.kind = stub.kind;
  a.record.pace = stub.pace;
  a.record.spawn_frame = stub.spawn_frame;
  a.record.end_frame = stub.spawn_frame;
  a.record.trajectory = {stub.start};
  a.goal = stub.destination;
  if (config.ablation.no_navmesh) {
    a.path = {stub.start, stub.destination};
  } else {
    try {
      a.path = shortest_path(graph, stub.start, stub.destination);
    } catch (const NoPathError&) {
      a.path = {stub.start, stub.destination};
    }
  }
  const double pace = std::max(stub.pace, 0.1);
  a.lifetime_frames = config.lifetime_factor * polyline_length(a.path) / pace * config.fps;
  return a;
}

Departure departure_check(const LiveAgent& agent, int frame, const SimulatorConfig& config) {
  if (frame <= agent.record.spawn_frame) return Departure::kNone;
  if (distance(agent.record.trajectory.back(), agent.goal) <= config.arrival_radius) return Departure::kArrived;
  if (frame - agent.record.spawn_frame > agent.lifetime_frames) return Departure::kTimedOut;
  return Departure::kNone;
}

bool keep_traversable(const NavGraph& graph, Vec2& p) {
  if (graph.traversable(p)) return true;
  const auto q = graph.project(p, 2.0);
  if (!q) return false;
  p = *q;
  return true;
}

namespace {

double distance_to_path(const Polyline& path, const Vec2& p) {
  if (path.size() < 2) return path.empty() ? 0.0 : distance(path.front(), p);
  return distance(point_at_arc_length(path, project_arc_length(path, p)), p);
}

void decide(SimState& state, const std::vector<std::size_t>& deciders, const SimulatorModel& model,
            const NavGraph& graph, const SceneLayout& layout, int frame, Rng& rng) {
  const SimulatorConfig& config = model.config();
  const int dims = config.condition_dims();
  const auto rows = static_cast<Eigen::Index>(deciders.size());
  Matrix features(rows, dims);
  std::vector<int> prev;
  std::vector<SimilarityTransform> frames;
  for (Eigen::Index r = 0; r < rows; ++r) {
    LiveAgent& a = state.live[deciders[static_cast<std::size_t>(r)]];
    const std::vector<Vec2>& traj = a.record.trajectory;
    const Vec2 pos = traj.back();
    if (config.ablation.no_navmesh) {
      a.path = {pos, a.goal};
    } else if (distance_to_path(a.path, pos) > 1.0) {
      try {
        a.path = shortest_path(graph, pos, a.goal);
      } catch (const NoPathError&) {
        a.path = {pos, a.goal};
      }
    }
    ConditionInput in;
    in.kind = a.record.kind;
    in.pace = a.record.pace;
    in.position = pos;
    in.destination = a.goal;
    in.control = control_point(a.path, pos, a.record.pace, config.horizon_s);
    const int k = static_cast<int>(traj.size()) - 1;
    in.frame = canonical_transform(pos, in.control, a.record.pace, last_heading(traj), config.frame_options());
    in.history = history_window(traj, k, config.history_frames);
    in.velocity = history_velocity(traj, k, config.history_frames, config.fps);
    if (!config.ablation.no_social) {
      for (std::size_t j = 0; j < state.live.size(); ++j) {
        if (j == deciders[static_cast<std::size_t>(r)]) continue;
        const auto& ot = state.live[j].record.trajectory;
        const int ok = static_cast<int>(ot.size()) - 1;
        in.others.push_back({ot.back(), history_velocity(ot, ok, config.history_frames, config.fps)});
      }
    }
    const std::vector<double> f = build_conditions(in, layout, config);
    for (int c = 0; c < dims; ++c) features(r, c) = f[static_cast<std::size_t>(c)];
    prev.push_back(a.state);
    frames.push_back(in.frame);
  }
  const Matrix probs = model.transition_probs(features, prev);
  std::vector<int> next;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double u = uniform01(rng);
    double acc = 0.0;
    int pick = static_cast<int>(probs.cols()) - 1;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      acc += probs(r, c);
      if (u < acc) {
        pick = static_cast<int>(c);
        break;
      }
    }
    next.push_back(pick);
  }
  const Matrix canon = model.decode_canonical(features, next);
  for (Eigen::Index r = 0; r < rows; ++r) {
    LiveAgent& a = state.live[deciders[static_cast<std::size_t>(r)]];
    a.state = next[static_cast<std::size_t>(r)];
    a.plan.clear();
    for (int j = 0; j < config.segment_frames; ++j) {
      a.plan.push_back(frames[static_cast<std::size_t>(r)].to_world({canon(r, 2 * j), canon(r, 2 * j + 1)}));
    }
    a.plan_start = frame + 1;
  }
}

}  // namespace

void depart_and_spawn(SimState& state, int frame, const NavGraph& graph, const SimulatorConfig& config,
                      WindowReport& report) {
  std::vector<LiveAgent> still;
  still.reserve(state.live.size());
  for (LiveAgent& a : state.live) {
    const Departure d = departure_check(a, frame, config);
    if (d == Departure::kNone) {
      still.push_back(std::move(a));
      continue;
    }
    ++(d == Departure::kArrived ? report.arrived : report.timed_out);
    state.finished.push_back(std::move(a.record));
  }
  state.live = std::move(still);

  std::stable_sort(state.pending.begin(), state.pending.end(),
                   [](const AgentStub& a, const AgentStub& b) { return a.spawn_frame < b.spawn_frame; });
  std::size_t used = 0;
  while (used < state.pending.size() && state.pending[used].spawn_frame <= frame) {
    AgentStub stub = state.pending[used++];
    stub.spawn_frame = frame;
    state.live.push_back(make_live_agent(stub, state.next_id++, graph, config));
    ++report.spawned;
    ++report.rows;
  }
  state.pending.erase(state.pending.begin(), state.pending.begin() + static_cast<std::ptrdiff_t>(used));
}

WindowReport step_window(SimState& state, const SimulatorModel& model, const NavGraph& graph,
                         const SceneLayout& layout, int window_start, int window, Rng& rng) {
  const SimulatorConfig& config = model.config();
  WindowReport report;
  for (int f = window_start; f < window_start + window; ++f) {
    for (LiveAgent& a : state.live) {
      const int idx = f - a.plan_start;
      Vec2 p = (idx >= 0 && idx < static_cast<int>(a.plan.size())) ? a.plan[static_cast<std::size_t>(idx)]
                                                                     : a.record.trajectory.back();
      if (!graph.traversable(p)) {
        if (!keep_traversable(graph, p)) p = a.record.trajectory.back();
        ++report.reprojected;
      }
      a.record.trajectory.push_back(p);
      a.record.end_frame = f;
      ++report.rows;
    }
    depart_and_spawn(state, f, graph, config, report);

    std::vector<std::size_t> deciders;
    for (std::size_t i = 0; i < state.live.size(); ++i) {
      if ((f - state.live[i].record.spawn_frame) % config.segment_frames == 0) deciders.push_back(i);
    }
    if (!deciders.empty()) decide(state, deciders, model, graph, layout, f, rng);
  }
  return report;
}

namespace {

void accumulate(WindowReport& total, const WindowReport& w) {
  total.rows += w.rows;
  total.spawned += w.spawned;
  total.arrived += w.arrived;
  total.timed_out += w.timed_out;
  total.reprojected += w.reprojected;
}

}  // namespace

Scenario rollout(std::span<const double> population_prob, const RolloutOptions& options, const EmitFn& emit,
                 const StepFn& step, Rng& count_rng, RolloutReport* report) {
  if (options.window < 1) throw InputError("window length must be positive");
  if (options.duration < 0) throw InputError("duration must be non-negative");
  RolloutReport local;
  Scenario out;
  out.fps = options.fps;
  out.scene_id = options.scene_id;
  out.total_frames = options.duration;
  if (options.duration == 0) {
    if (report != nullptr) *report = local;
    return out;
  }
  const int offset = options.warmup ? options.window : 0;
  const int total = options.duration + offset;
  SimState state;
  for (int ws = 0; ws < total; ws += options.window) {
    const int len = std::min(options.window, total - ws);
    const std::vector<Vec2> occupied = state.live_positions();
    int count = sample_population_count(population_prob, static_cast<int>(occupied.size()), count_rng);
    if (options.warmup && ws == 0) count = (count + 1) / 2;
    for (const AgentStub& stub : emit(ws, count, occupied)) {
      if (stub.spawn_frame >= ws + len) {
        ++local.dropped;
        continue;
      }
      state.pending.push_back(stub);
      ++local.emitted;
    }
    accumulate(local.totals, step(state, ws, len));
    ++local.windows;
  }
  for (const Agent& a : state.scenario(options.fps, total, options.scene_id).agents) {
    if (a.end_frame < offset) continue;
    Agent b = a;
    const int skip = std::max(offset - a.spawn_frame, 0);
    b.trajectory.erase(b.trajectory.begin(), b.trajectory.begin() + skip);
    b.spawn_frame = a.spawn_frame + skip - offset;
    b.end_frame = a.end_frame - offset;
    b.recompute_pace(options.fps);
    out.agents.push_back(std::move(b));
  }
  if (report != nullptr) *report = local;
  return out;
}

}  // namespace crowdes
