#include <doctest.h>

#include <cmath>

#include "crowdes/emitter.hpp"
#include "crowdes/error.hpp"
#include "fixtures.hpp"

using namespace crowdes;

namespace {

EmitterConfig tiny_config() {
  EmitterConfig c;
  c.steps = 20;
  c.model_dim = 16;
  c.blocks = 1;
  c.heads = 2;
  c.ffn_width = 16;
  c.head_width = 16;
  c.seed = 3;
  return c;
}

SceneLayout open_layout(int w, int h) {
  RasterGeometry g;
  g.width_cells = w;
  g.height_cells = h;
  g.cell_size = 1.0;
  SceneLayout l;
  l.segmentation = GridRaster(g, 5.0);
  l.appearance = GridRaster(g, 0.0);
  l.density = GridRaster(g, 0.0);
  l.traversable = GridRaster(g, 1.0);
  l.population_prob = {0.0, 1.0};
  return l;
}

}  // namespace

TEST_CASE("population count subtracts the previous count and clamps at zero") {
  Rng rng(1);
  std::vector<double> p(8, 0.0);
  p[5] = 1.0;
  CHECK(sample_population_count(p, 3, rng) == 2);
  std::vector<double> q(8, 0.0);
  q[2] = 1.0;
  CHECK(sample_population_count(q, 7, rng) == 0);

  const std::vector<double> uniform(10, 0.1);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) sum += sample_population_count(uniform, 0, rng);
  CHECK(std::abs(sum / 100000 - 4.5) <= 0.05);
}

TEST_CASE("schedule follows the linear beta recurrence") {
  const NoiseSchedule s = NoiseSchedule::linear(50);
  double ab = 1.0;
  for (int m = 1; m <= 50; ++m) {
    const double beta = 1e-4 + (0.02 - 1e-4) * (m - 1) / 49.0;
    ab *= 1.0 - beta;
    CHECK(s.beta(m) == doctest::Approx(beta).epsilon(1e-12));
    CHECK(s.alpha_bar(m) == doctest::Approx(ab).epsilon(1e-12));
  }
  CHECK(s.alpha_bar(0) == 1.0);
  const auto ts = s.sampling_timesteps(5);
  CHECK(ts.front() == 50);
  for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
}

TEST_CASE("forward diffusion limits") {
  const NoiseSchedule s = NoiseSchedule::linear(50);
  Rng rng(4);
  const Matrix x0 = Matrix::Constant(1, kParamDims, 0.7);
  const Matrix x1 = forward_diffuse(x0, 1, s, rng);
  CHECK((x1 - x0).cwiseAbs().maxCoeff() <= 6 * std::sqrt(s.beta(1)) + 1e-3);

  double mean = 0.0, sq = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double v = forward_diffuse(Matrix::Constant(1, 1, 0.7), 50, s, rng)(0, 0);
    mean += v / n;
    sq += v * v / n;
  }
  CHECK(std::abs(mean - std::sqrt(s.alpha_bar(50)) * 0.7) <= 0.03);
  CHECK(std::abs(sq - mean * mean - (1 - s.alpha_bar(50))) <= 0.05);
  CHECK_THROWS_AS(forward_diffuse(x0, 0, s, rng), InputError);
  CHECK_THROWS_AS(forward_diffuse(x0, 51, s, rng), InputError);
}

TEST_CASE("a perfect denoiser recovers the clean sample in one step from m=1") {
  const NoiseSchedule s = NoiseSchedule::linear(50);
  Rng rng(5);
  Matrix x0(3, kParamDims);
  for (int i = 0; i < x0.size(); ++i) x0.data()[i] = standard_normal(rng);
  Matrix noise;
  const Matrix x1 = forward_diffuse(x0, 1, s, rng, &noise);
  const Matrix back = ddim_sample(s, x1, {1}, [&](const Matrix&, int) { return noise; });
  CHECK((back - x0).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("zero-weight denoiser follows the scalar DDIM recurrence") {
  const EmitterModel model(tiny_config(), nn::Init::kZero);
  const SceneLayout layout = open_layout(8, 8);
  const Matrix ctx = encode_context(layout, {}, 16);
  Rng rng(6);
  Matrix x(4, kParamDims);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
  const Matrix out = denoise_step(model, x, 12, 7, ctx);
  const double ab = model.schedule().alpha_bar(12);
  const double ab_prev = model.schedule().alpha_bar(7);
  for (int i = 0; i < x.size(); ++i) {
    const double x0_hat = x.data()[i] / std::sqrt(ab);
    CHECK(out.data()[i] == doctest::Approx(std::sqrt(ab_prev) * x0_hat).epsilon(1e-12));
  }
  CHECK(denoise_step(model, Matrix(0, kParamDims), 12, 7, ctx).rows() == 0);
}

TEST_CASE("denoising is equivariant to agent order") {
  const EmitterModel model(tiny_config());
  const Matrix ctx = encode_context(open_layout(8, 8), {}, 16);
  Rng rng(7);
  Matrix x(4, kParamDims);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
  const Matrix y = denoise_step(model, x, 20, 10, ctx);
  Matrix xp(4, kParamDims);
  const int perm[4] = {2, 0, 3, 1};
  for (int i = 0; i < 4; ++i) xp.row(i) = x.row(perm[i]);
  const Matrix yp = denoise_step(model, xp, 20, 10, ctx);
  for (int i = 0; i < 4; ++i) CHECK((yp.row(i) - y.row(perm[i])).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("emission is empty for zero agents and deterministic for a fixed seed") {
  const auto f = crowdes::testing::corridor_fixture(1, 400);
  const SceneLayout layout = derive_layout(f.segmentation, f.scenario);
  const NavGraph graph(layout.traversable);
  EmitterModel model(tiny_config());
  model.codec() = fit_codec(f.scenario, layout, 50);
  Rng rng(1);
  CHECK(emit_agents(model, layout, graph, {}, 0, {}, rng).agents.empty());
  Rng a(9), b(9);
  const auto ra = emit_agents(model, layout, graph, {}, 3, {}, a);
  const auto rb = emit_agents(model, layout, graph, {}, 3, {}, b);
  REQUIRE(ra.agents.size() == rb.agents.size());
  for (std::size_t i = 0; i < ra.agents.size(); ++i) {
    CHECK(ra.agents[i].start == rb.agents[i].start);
    CHECK(ra.agents[i].destination == rb.agents[i].destination);
    CHECK(ra.agents[i].spawn_frame == rb.agents[i].spawn_frame);
    CHECK(graph.traversable(ra.agents[i].start));
  }
}

TEST_CASE("zero epochs leave the model unchanged and an empty dataset is rejected") {
  const auto f = crowdes::testing::corridor_fixture(2, 400);
  const SceneLayout layout = derive_layout(f.segmentation, f.scenario);
  EmitterModel model(tiny_config());
  model.codec() = fit_codec(f.scenario, layout, 50);
  const auto data = build_emitter_dataset(f.scenario, layout, 50, 16, model.codec());
  std::vector<Matrix> before;
  for (const auto& p : model.params().params()) before.push_back(p.value);
  TrainOptions o;
  o.epochs = 0;
  Rng rng(1);
  train_emitter(model, data, o, rng);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(model.params().params()[i].value == before[i]);
  o.epochs = 1;
  CHECK_THROWS_AS(train_emitter(model, {}, o, rng), InputError);
}

TEST_CASE("overfitting a single repeated window drives the loss down") {
  const auto f = crowdes::testing::corridor_fixture(3, 400);
  const SceneLayout layout = derive_layout(f.segmentation, f.scenario);
  EmitterConfig cfg = tiny_config();
  cfg.model_dim = 64;
  cfg.ffn_width = 128;
  cfg.head_width = 128;
  EmitterModel model(cfg);
  model.codec() = fit_codec(f.scenario, layout, 50);
  auto data = build_emitter_dataset(f.scenario, layout, 50, 16, model.codec());
  std::vector<EmitterExample> one;
  for (const auto& ex : data) {
    if (ex.params.rows() > 0) {
      one.assign(8, ex);
      break;
    }
  }
  REQUIRE_FALSE(one.empty());
  TrainOptions o;
  o.epochs = 800;
  o.batch = 8;
  o.adam.lr = 3e-3;
  o.adam.weight_decay = 0.0;
  Rng rng(2);
  const TrainLog log = train_emitter(model, one, o, rng);
  double late = 0.0;
  for (int i = 790; i < 800; ++i) late += log.epoch_loss[i] / 10.0;
  CHECK(late < 0.1 * log.epoch_loss.front());

  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> truth = one.front().params;
  for (int i = 0; i < truth.rows(); ++i) model.codec().standardize(truth.row(i).data());
  int within = 0, total = 0;
  Rng draw(8);
  const auto steps = model.schedule().sampling_timesteps(0);
  for (int trial = 0; trial < 40; ++trial) {
    Matrix x(truth.rows(), kParamDims);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(draw);
    const Matrix& ctx = one.front().context;
    x = ddim_sample(model.schedule(), x, steps, [&](const Matrix& xm, int m) { return model.predict_noise(xm, m, ctx); });
    for (int i = 0; i < x.rows(); ++i) {
      ++total;
      within += (x.row(i) - truth.row(i)).cwiseAbs().maxCoeff() <= 3.0 ? 1 : 0;
    }
  }
  CHECK(static_cast<double>(within) / total >= 0.95);
}

TEST_CASE("histogram emission follows the appearance weights") {
  SceneLayout layout = open_layout(10, 10);
  const NavGraph graph(layout.traversable);
  AgentPrior prior;
  prior.kind_freq[0] = 1.0;
  prior.paces = {1.2};
  Rng rng(3);
  CHECK(histogram_emit(layout.appearance, graph, prior, 0, 0, 50, rng).agents.empty());

  layout.appearance.at(4, 6) = 1.0;
  for (const auto& a : histogram_emit(layout.appearance, graph, prior, 50, 0, 50, rng).agents) {
    CHECK(layout.appearance.world_to_cell(a.start) == Cell{4, 6});
    CHECK(a.pace == 1.2);
  }

  layout.appearance.at(1, 1) = 1.0;
  int first = 0;
  const int n = 10000;
  const auto r = histogram_emit(layout.appearance, graph, prior, n, 0, 50, rng);
  for (const auto& a : r.agents) first += layout.appearance.world_to_cell(a.start) == Cell{1, 1} ? 1 : 0;
  CHECK(std::abs(static_cast<double>(first) / n - 0.5) <= 0.02);

  const GridRaster zero(layout.appearance.geometry(), 0.0);
  CHECK(histogram_emit(zero, graph, prior, 20, 0, 50, rng).agents.size() == 20);
}

TEST_CASE("checkpoints round-trip") {
  const auto f = crowdes::testing::corridor_fixture(4, 300);
  const SceneLayout layout = derive_layout(f.segmentation, f.scenario);
  EmitterModel model(tiny_config());
  model.codec() = fit_codec(f.scenario, layout, 50);
  model.save("/tmp/crowdes_unit_emitter.ckpt");
  const EmitterModel back = EmitterModel::load("/tmp/crowdes_unit_emitter.ckpt");
  const Matrix ctx = encode_context(layout, {}, 16);
  Matrix x = Matrix::Constant(2, kParamDims, 0.3);
  CHECK(denoise_step(model, x, 10, 5, ctx) == denoise_step(back, x, 10, 5, ctx));
  CHECK(back.codec().mean == model.codec().mean);
}
