// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is nonzero if any fail.
// Usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "crowdes/behavior_vocab.hpp"
#include "crowdes/emitter.hpp"
#include "crowdes/metrics.hpp"
#include "crowdes/nav_mesh.hpp"
#include "crowdes/nn.hpp"
#include "crowdes/runner.hpp"
#include "crowdes/se_orca.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace crowdes;
using namespace crowdes::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// Corridor training budget. Shared by criteria 12 and 14.
RunConfig corridor_config() {
  RunConfig rc;
  rc.scene_id = "corridor";
  rc.seed = 7;
  rc.emitter_epochs = 300;
  rc.emitter_batch = 256;
  rc.emitter_lr = 2e-3;
  rc.sim_epochs = 60;
  rc.sim_batch = 256;
  rc.sim_lr = 2e-3;
  return rc;
}

struct TrainedCorridor {
  Fixture fixture;
  SceneData scene;
  Models models;
  double train_seconds = 0.0;
};

TrainedCorridor& corridor() {
  static std::optional<TrainedCorridor> cache;
  if (!cache) {
    TrainedCorridor t;
    t.fixture = corridor_fixture(11);
    t.scene = make_scene(t.fixture.scenario, t.fixture.segmentation);
    const auto t0 = Clock::now();
    t.models = train_models(t.scene, corridor_config());
    t.train_seconds = seconds_since(t0);
    cache.emplace(std::move(t));
  }
  return *cache;
}

Outcome emd_oracle() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(1, 8);
  std::uniform_real_distribution<double> value(-5.0, 5.0);
  double worst = 0.0;
  const auto t0 = Clock::now();
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(size(rng)), b(size(rng));
    for (double& v : a) v = value(rng);
    for (double& v : b) v = trial % 3 == 0 ? std::round(value(rng)) : value(rng);
    if (trial % 5 == 0 && !a.empty()) b[0] = a[0];
    worst = std::max(worst, std::abs(emd_1d(a, b) - lp_emd(a, b)));
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 1e-9 && elapsed < 1.0, fmt("max |emd - lp| = %.2e", worst) + fmt(", %.3f s", elapsed)};
}

Outcome dtw_oracle() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> len(1, 6);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  int mismatches = 0;
  const auto t0 = Clock::now();
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec2> a(len(rng)), b(len(rng));
    for (Vec2& p : a) p = {coord(rng), coord(rng)};
    for (Vec2& p : b) p = {coord(rng), coord(rng)};
    const double fps = trial % 2 == 0 ? 5.0 : 1.0;
    if (dtw(a, b, fps) != exhaustive_dtw(a, b, fps)) ++mismatches;
  }
  const double elapsed = seconds_since(t0);
  return {mismatches == 0 && elapsed < 1.0, std::to_string(mismatches) + " mismatches" + fmt(", %.3f s", elapsed)};
}

Outcome metric_fixed_point() {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Scenario gt = random_scenario(seed, 25, 200, 4.0, 4.0);
    const MetricsReport r = evaluate({gt}, gt);
    const long pairs = naive_collision_pairs(gt);
    const double expected_col = 100.0 * pairs / (static_cast<double>(gt.total_frames) * gt.agents.size());
    const bool zeros = r.dens == 0.0 && r.freq == 0.0 && r.cov == 0.0 && r.pop == 0.0 && r.kinem == 0.0 &&
                       r.dtw == 0.0 && r.div == 1.0;
    const bool col = r.col == metric_col_direct(gt) && std::abs(r.col - expected_col) <= 1e-12 * std::max(1.0, expected_col);
    ok = ok && zeros && col;
    detail = fmt("col %.6f", r.col) + fmt(" vs pairwise %.6f", expected_col);
  }
  return {ok, detail};
}

Outcome collision_constructions() {
  Scenario s;
  s.total_frames = 50;
  for (int i = 0; i < 2; ++i) {
    Agent a;
    a.id = i;
    a.spawn_frame = 0;
    a.end_frame = 49;
    for (int t = 0; t < 50; ++t) a.trajectory.push_back({0.1 * t, 1.0});
    s.agents.push_back(a);
  }
  const double coincident = metric_col(s);
  for (int t = 0; t < 50; ++t) s.agents[1].trajectory[t] = {0.1 * t, 1.0 + 0.3 + 0.01 * (t % 5)};
  const double apart = metric_col(s);
  return {coincident == 100.0 && apart == 0.0, fmt("coincident %.1f", coincident) + fmt(", apart %.1f", apart)};
}

Outcome quadrat_conservation() {
  int violations = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::mt19937_64 rng(300 + trial);
    const Scenario s = random_scenario(300 + trial, std::uniform_int_distribution<int>(1, 30)(rng),
                                       std::uniform_int_distribution<int>(2, 120)(rng));
    const int q = std::uniform_int_distribution<int>(1, 12)(rng);
    const Scenario ref = random_scenario(900 + trial, 5, 40, 12.0, 12.0);
    const QuadratGrid grid{ref.bounds(), q};
    const auto counts = quadrat_counts(s, grid);
    const auto frames = sampled_frames(s);
    for (std::size_t k = 0; k < frames.size(); ++k) {
      int alive = 0;
      for (const Agent& a : s.agents) alive += a.alive_at(frames[k]) ? 1 : 0;
      if (std::accumulate(counts[k].begin(), counts[k].end(), 0) != alive) ++violations;
    }
  }
  return {violations == 0, std::to_string(violations) + " violations"};
}

// Loss = sum(out .* weights) for a randomly composed network.
struct GradNet {
  nn::ParamStore store;
  std::vector<nn::Mlp> mlps;
  std::vector<nn::SetAttentionBlock> blocks;
  nn::Matrix input, context, weights;
  bool use_context = false;

  double loss(nn::Tape* keep = nullptr) {
    nn::Tape local(&store);
    nn::Tape& tape = keep ? *keep : local;
    nn::Var x = tape.constant(input);
    nn::Var ctx = use_context ? tape.constant(context) : nn::Var{};
    for (const auto& m : mlps) x = m.forward(tape, x);
    for (const auto& b : blocks) x = b.forward(tape, x, ctx);
    nn::Var l = tape.sum(tape.mul(x, tape.constant(weights)));
    if (keep) tape.backward(l);
    return tape.value(l)(0, 0);
  }
};

Outcome gradient_check() {
  std::mt19937_64 rng(606);
  double worst = 0.0;
  for (int net = 0; net < 20; ++net) {
    GradNet g;
    const int dim = std::uniform_int_distribution<int>(2, 6)(rng) * 2;
    const int in = std::uniform_int_distribution<int>(1, 6)(rng);
    const int tokens = std::uniform_int_distribution<int>(1, 4)(rng);
    const auto act = net % 2 == 0 ? nn::Activation::kGelu : nn::Activation::kRelu;
    nn::NetSpec spec;
    spec.widths = {in, std::uniform_int_distribution<int>(2, 8)(rng), dim};
    spec.activation = act;
    spec.seed = 1000 + net;
    g.mlps.emplace_back(g.store, "mlp", spec);
    const int blocks = net % 4;
    const int ctx_dim = 3;
    for (int b = 0; b < blocks; ++b) {
      g.blocks.emplace_back(g.store, "blk" + std::to_string(b), dim, ctx_dim, 2, 8, act, 2000 + net * 10 + b);
    }
    g.use_context = net % 3 != 0;
    std::normal_distribution<double> n01(0.0, 1.0);
    g.input = nn::Matrix(tokens, in);
    for (int i = 0; i < g.input.size(); ++i) g.input(i) = n01(rng);
    g.context = nn::Matrix(5, ctx_dim);
    for (int i = 0; i < g.context.size(); ++i) g.context(i) = n01(rng);
    g.weights = nn::Matrix(tokens, dim);
    for (int i = 0; i < g.weights.size(); ++i) g.weights(i) = n01(rng);

    g.store.zero_grad();
    nn::Tape tape(&g.store);
    g.loss(&tape);
    const double h = 1e-5;
    for (nn::Param& p : g.store.params()) {
      for (int i = 0; i < p.value.size(); ++i) {
        const double saved = p.value(i);
        p.value(i) = saved + h;
        const double up = g.loss();
        p.value(i) = saved - h;
        const double down = g.loss();
        p.value(i) = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = p.grad(i);
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-5});
        worst = std::max(worst, std::abs(numeric - analytic) / scale);
      }
    }
  }
  return {worst < 1e-4, fmt("max relative error %.2e", worst)};
}

Outcome diffusion_marginal() {
  const NoiseSchedule sched = NoiseSchedule::linear(50);
  Rng rng = named_stream(7, "diffusion-marginal");
  nn::Matrix x0(1, kParamDims);
  for (int d = 0; d < kParamDims; ++d) x0(0, d) = -1.5 + 0.25 * d;
  const int n = 10000;
  int failures = 0;
  double worst_z = 0.0;
  for (int m : {1, 25, 50}) {
    std::vector<double> sum(kParamDims, 0.0), sum_sq(kParamDims, 0.0);
    for (int i = 0; i < n; ++i) {
      const nn::Matrix x = forward_diffuse(x0, m, sched, rng);
      for (int d = 0; d < kParamDims; ++d) {
        sum[d] += x(0, d);
        sum_sq[d] += x(0, d) * x(0, d);
      }
    }
    const double ab = sched.alpha_bar(m);
    const double var = 1.0 - ab;
    for (int d = 0; d < kParamDims; ++d) {
      const double mean = sum[d] / n;
      const double sample_var = (sum_sq[d] - n * mean * mean) / (n - 1);
      const double z_mean = std::abs(mean - std::sqrt(ab) * x0(0, d)) / std::sqrt(var / n);
      const double z_var = std::abs(sample_var - var) / (var * std::sqrt(2.0 / (n - 1)));
      worst_z = std::max({worst_z, z_mean, z_var});
      if (z_mean > 4.0 || z_var > 4.0) ++failures;
    }
  }
  return {failures == 0, fmt("max |z| = %.2f", worst_z)};
}

Outcome ddim_determinism() {
  const Fixture f = corridor_fixture(5, 800);
  const SceneData scene = make_scene(f.scenario, f.segmentation);
  const NavGraph graph(scene.layout.traversable);
  EmitterConfig cfg;
  cfg.seed = 3;
  EmitterModel model(cfg);
  model.codec() = fit_codec(scene.train, scene.layout, cfg.window);
  auto run = [&] {
    Rng rng = named_stream(99, "emit");
    EmitOptions opts;
    opts.window_start = 100;
    return emit_agents(model, scene.layout, graph, {}, 12, opts, rng);
  };
  const EmitResult a = run();
  const EmitResult b = run();
  bool identical = a.agents.size() == b.agents.size() && a.dropped == b.dropped;
  for (std::size_t i = 0; identical && i < a.agents.size(); ++i) {
    const AgentStub& p = a.agents[i];
    const AgentStub& q = b.agents[i];
    identical = p.kind == q.kind && p.pace == q.pace && p.spawn_frame == q.spawn_frame && p.start == q.start &&
                p.destination == q.destination;
  }

  Rng rng(5);
  nn::Matrix x(9, kParamDims);
  for (int i = 0; i < x.size(); ++i) x(i) = standard_normal(rng);
  const nn::Matrix ctx = encode_context(scene.layout, {});
  std::vector<int> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  nn::Matrix xp(9, kParamDims);
  for (int i = 0; i < 9; ++i) xp.row(i) = x.row(perm[i]);
  double worst = 0.0;
  for (int m : {1, 20, 50}) {
    const nn::Matrix e = model.predict_noise(x, m, ctx);
    const nn::Matrix ep = model.predict_noise(xp, m, ctx);
    for (int i = 0; i < 9; ++i) worst = std::max(worst, (ep.row(i) - e.row(perm[i])).cwiseAbs().maxCoeff());
  }
  return {identical && worst <= 1e-6 && !a.agents.empty(),
          std::string(identical ? "bitwise identical" : "runs differ") + fmt(", permutation error %.2e", worst)};
}

Outcome kmeans_check() {
  std::mt19937_64 rng(909);
  std::normal_distribution<double> noise(0.0, 0.05);
  const std::vector<std::vector<double>> means = {{0, 0, 0, 0}, {5, 5, 0, 0}, {0, 5, 5, -5}};
  std::vector<std::vector<double>> samples;
  std::vector<std::vector<double>> bundle_mean(3, std::vector<double>(4, 0.0));
  for (int b = 0; b < 3; ++b) {
    for (int i = 0; i < 60; ++i) {
      std::vector<double> s = means[b];
      for (double& v : s) v += noise(rng);
      for (int d = 0; d < 4; ++d) bundle_mean[b][d] += s[d] / 60.0;
      samples.push_back(s);
    }
  }
  bool monotone = true;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const KMeansResult r = kmeans_fit(samples, 3, 100, seed);
    for (std::size_t i = 1; i < r.sse_history.size(); ++i) monotone = monotone && r.sse_history[i] <= r.sse_history[i - 1];
    for (const auto& bm : bundle_mean) {
      double best = 1e300;
      for (const auto& c : r.vocab.centers) best = std::min(best, std::sqrt(squared_distance(c, bm)));
      worst = std::max(worst, best);
    }
  }
  return {monotone && worst <= 0.05, std::string(monotone ? "SSE monotone" : "SSE increased") +
                                         fmt(", max center offset %.4f", worst)};
}

Outcome navigation_check() {
  RasterGeometry g;
  g.width_cells = 40;
  g.height_cells = 40;
  g.cell_size = 0.5;
  const GridRaster open_map(g, 1.0);
  const NavGraph open_graph(open_map);
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> coord(0.3, 19.7);
  double worst_ratio = 0.0;
  bool deterministic = true;
  for (int i = 0; i < 30; ++i) {
    const Vec2 a{coord(rng), coord(rng)}, b{coord(rng), coord(rng)};
    const Polyline p = shortest_path(open_graph, a, b);
    deterministic = deterministic && p == shortest_path(open_graph, a, b);
    const double euclid = distance(a, b);
    if (euclid > 1e-9) worst_ratio = std::max(worst_ratio, polyline_length(p) / euclid);
  }

  GridRaster u_map(g, 1.0);
  for (int y = 10; y <= 30; ++y) u_map.at(25, y) = 0.0;
  for (int x = 12; x <= 25; ++x) {
    u_map.at(x, 10) = 0.0;
    u_map.at(x, 30) = 0.0;
  }
  const NavGraph u_graph(u_map);
  const Vec2 from{10.0, 10.0}, to{17.0, 10.0};
  const Polyline up = shortest_path(u_graph, from, to);
  deterministic = deterministic && up == shortest_path(u_graph, from, to);
  int blocked = 0;
  for (std::size_t i = 0; i + 1 < up.size(); ++i) {
    const int steps = static_cast<int>(std::ceil(distance(up[i], up[i + 1]) / 0.005)) + 1;
    for (int k = 0; k <= steps; ++k) {
      const Vec2 p = up[i] + (up[i + 1] - up[i]) * (static_cast<double>(k) / steps);
      if (u_map.sample(p, 0.0) < 0.5) ++blocked;
    }
  }
  return {worst_ratio <= 1.05 && blocked == 0 && deterministic,
          fmt("open ratio %.4f", worst_ratio) + ", blocked samples " + std::to_string(blocked) +
              (deterministic ? ", deterministic" : ", nondeterministic")};
}

// Minimum separation over a continuous ORCA rollout (positions linearly interpolated between frames).
double orca_min_separation(std::vector<OrcaAgent> agents, const std::vector<Vec2>& goals, double speed) {
  OrcaOptions opts;
  opts.time_step = 0.2;
  double min_sep = 1e300;
  for (int frame = 0; frame < 200; ++frame) {
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const Vec2 d = goals[i] - agents[i].position;
      agents[i].pref_velocity = norm(d) > speed * opts.time_step ? normalized(d) * speed : d / opts.time_step;
    }
    std::vector<Vec2> v(agents.size());
    for (std::size_t i = 0; i < agents.size(); ++i) {
      std::vector<OrcaAgent> others;
      for (std::size_t j = 0; j < agents.size(); ++j) {
        if (j != i) others.push_back(agents[j]);
      }
      v[i] = orca_velocity(agents[i], others, opts);
    }
    for (int sub = 1; sub <= 10; ++sub) {
      const double s = sub / 10.0 * opts.time_step;
      for (std::size_t i = 0; i < agents.size(); ++i) {
        for (std::size_t j = i + 1; j < agents.size(); ++j) {
          min_sep = std::min(min_sep, distance(agents[i].position + v[i] * s, agents[j].position + v[j] * s));
        }
      }
    }
    for (std::size_t i = 0; i < agents.size(); ++i) {
      agents[i].velocity = v[i];
      agents[i].position += v[i] * opts.time_step;
    }
  }
  return min_sep;
}

Outcome orca_safety() {
  double worst = 1e300;
  for (double speed : {0.8, 1.2, 1.5}) {
    OrcaAgent a, b;
    a.position = {-5.0, 0.0};
    b.position = {5.0, 0.0};
    a.max_speed = b.max_speed = speed;
    worst = std::min(worst, orca_min_separation({a, b}, {{5.0, 0.0}, {-5.0, 0.0}}, speed));
    std::vector<OrcaAgent> three(3);
    std::vector<Vec2> goals;
    for (int k = 0; k < 3; ++k) {
      const double ang = 2.0 * M_PI * k / 3.0;
      three[k].position = {5.0 * std::cos(ang), 5.0 * std::sin(ang)};
      three[k].max_speed = speed;
      goals.push_back(-three[k].position);
    }
    worst = std::min(worst, orca_min_separation(three, goals, speed));
  }
  return {worst >= 0.4, fmt("min separation %.4f m", worst)};
}

double pop_dens(const Scenario& gen, const Scenario& gt, double* dens) {
  const SceneMetrics m = metric_scene(gen, gt);
  *dens = m.dens;
  return m.pop;
}

Outcome corridor_end_to_end() {
  TrainedCorridor& c = corridor();
  const Scenario& gt = c.scene.train;
  RunConfig rc = corridor_config();
  rc.duration_frames = gt.total_frames;
  rc.reps = 5;

  int arrived = 0, timed_out = 0;
  double gen_pop = 0.0, gen_dens = 0.0, base_pop = 0.0, base_dens = 0.0;
  RunConfig base = rc;
  base.emitter = EmitterKind::kHistogram;
  SceneData uniform_scene = c.scene;
  for (double& v : uniform_scene.layout.appearance.values()) v = 0.0;
  for (int r = 0; r < rc.reps; ++r) {
    GenerateReport report;
    const Scenario gen = generate_scenario(c.scene, &c.models, rc, 500 + r, &report);
    arrived += report.rollout.totals.arrived;
    timed_out += report.rollout.totals.timed_out;
    double d = 0.0;
    gen_pop += pop_dens(gen, gt, &d);
    gen_dens += d;
    const Scenario b = generate_scenario(uniform_scene, &c.models, base, 500 + r);
    base_pop += pop_dens(b, gt, &d);
    base_dens += d;
  }
  const double arrival = arrived / std::max(1.0, static_cast<double>(arrived + timed_out));

  const NavGraph graph(c.scene.layout.traversable);
  Rng rng = named_stream(17, "emit");
  int inside = 0, total = 0;
  for (int w = 0; w < 20; ++w) {
    EmitOptions opts;
    opts.window_start = w * 50;
    const EmitResult e = emit_agents(*c.models.emitter, c.scene.layout, graph, {}, 10, opts, rng);
    for (const AgentStub& s : e.agents) {
      inside += in_corridor_spawn_zone(s.start) ? 1 : 0;
      ++total;
    }
  }
  const double start_rate = inside / std::max(1.0, static_cast<double>(total));
  const bool ok = c.train_seconds < 300.0 && arrival >= 0.9 && gen_pop <= 0.5 * base_pop &&
                  gen_dens <= 0.5 * base_dens && start_rate >= 0.9;
  std::ostringstream d;
  d << "train " << fmt("%.1f s", c.train_seconds) << ", arrival " << fmt("%.3f", arrival) << " (" << arrived << "/"
    << arrived + timed_out << "), pop " << fmt("%.4f", gen_pop / rc.reps) << " vs baseline "
    << fmt("%.4f", base_pop / rc.reps) << ", dens " << fmt("%.5f", gen_dens / rc.reps) << " vs baseline "
    << fmt("%.5f", base_dens / rc.reps) << ", starts in zone " << fmt("%.3f", start_rate) << " (" << total << ")";
  return {ok, d.str()};
}

Outcome ablation_direction() {
  const Fixture f = crossing_fixture(21);
  const SceneData scene = make_scene(f.scenario, f.segmentation);
  RunConfig rc = corridor_config();
  rc.scene_id = "crossing";
  rc.duration_frames = 1000;
  const Models full = train_models(scene, rc);
  RunConfig ab = rc;
  ab.ablation.no_social = true;
  const Models blind = train_models(scene, ab);
  double col_full = 0.0, col_blind = 0.0;
  const int runs = 20;
  for (int r = 0; r < runs; ++r) {
    col_full += metric_col(generate_scenario(scene, &full, rc, 700 + r));
    col_blind += metric_col(generate_scenario(scene, &blind, ab, 700 + r));
  }
  col_full /= runs;
  col_blind /= runs;
  return {col_blind > col_full, fmt("col full %.4f", col_full) + fmt(", without social %.4f", col_blind) +
                                    fmt(", ground truth %.4f", metric_col(scene.train))};
}

Outcome performance() {
  TrainedCorridor& c = corridor();
  RunConfig rc = corridor_config();
  rc.duration_frames = 18000;
  const auto t0 = Clock::now();
  const Scenario s = generate_scenario(c.scene, &c.models, rc, 1234);
  const double elapsed = seconds_since(t0);
  int peak = 0;
  for (int t = 0; t < s.total_frames; ++t) peak = std::max(peak, s.alive_count(t));
  return {elapsed <= 120.0 && peak <= 30 && s.total_frames == 18000,
          fmt("%.1f s", elapsed) + ", peak concurrency " + std::to_string(peak) + ", " +
              std::to_string(s.agents.size()) + " agents"};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CROWDES_CLI) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Outcome reproducibility() {
  const fs::path dir = fs::temp_directory_path() / "crowdes_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Fixture f = corridor_fixture(3, 1200);
  write_scenario((dir / "data.traj").string(), f.scenario);
  write_pgm((dir / "seg.pgm").string(), f.segmentation);
  {
    std::ofstream cfg(dir / "scene.cfg");
    cfg << "scene = corridor\nsegmentation = seg.pgm\ncell_size = 0.5\ntrajectories = data.traj\nformat = generic\n";
  }
  const std::string d = dir.string();
  const std::string budget =
      " --seed 5 --set emitter_epochs=4 --set sim_epochs=3 --set sim_batch=256 --set emitter_batch=128";
  int rc = run_cli("prepare --config " + d + "/scene.cfg --out " + d + "/scene");
  rc |= run_cli("train --scene " + d + "/scene --out " + d + "/ck1" + budget);
  rc |= run_cli("train --scene " + d + "/scene --out " + d + "/ck2" + budget);
  rc |= run_cli("generate --scene " + d + "/scene --ckpt " + d + "/ck1 --out " + d + "/g1.traj --seed 9 --duration-frames 600");
  rc |= run_cli("generate --scene " + d + "/scene --ckpt " + d + "/ck1 --out " + d + "/g2.traj --seed 9 --duration-frames 600");
  if (rc != 0) return {false, "CLI invocation failed"};
  bool same = true;
  int files = 0;
  for (const char* name : {"emitter.ckpt", "simulator.ckpt", "vocab.txt", "train_log.csv"}) {
    same = same && read_file(dir / "ck1" / name) == read_file(dir / "ck2" / name);
    ++files;
  }
  const std::string g1 = read_file(dir / "g1.traj");
  same = same && g1 == read_file(dir / "g2.traj") && !g1.empty();
  fs::remove_all(dir);
  return {same, std::to_string(files) + " checkpoint files and the generated scenario " +
                    (same ? "byte-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"EMD matches optimal-transport oracle", emd_oracle},
      {"DTW matches exhaustive alignment", dtw_oracle},
      {"Metric fixed point on identical scenarios", metric_fixed_point},
      {"Collision constructions", collision_constructions},
      {"Quadrat conservation", quadrat_conservation},
      {"Reverse-mode gradients match finite differences", gradient_check},
      {"Diffusion marginal moments", diffusion_marginal},
      {"DDIM determinism and token equivariance", ddim_determinism},
      {"K-means monotone SSE and bundle recovery", kmeans_check},
      {"Navigation optimality and obstacle clearance", navigation_check},
      {"ORCA separation", orca_safety},
      {"Corridor end-to-end", corridor_end_to_end},
      {"Social-feature ablation raises collisions", ablation_direction},
      {"One-hour generation time", performance},
      {"Byte-identical train and generate", reproducibility},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("[%s] %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
