#include <doctest.h>

#include <cmath>
#include <random>

#include "crowdes/error.hpp"
#include "crowdes/scene_layout.hpp"
#include "fixtures.hpp"

using namespace crowdes;

namespace {

RasterGeometry grid(int w, int h, double cs = 1.0) {
  RasterGeometry g;
  g.width_cells = w;
  g.height_cells = h;
  g.cell_size = cs;
  return g;
}

Agent walker(int id, std::vector<Vec2> pts, int spawn = 0) {
  Agent a;
  a.id = id;
  a.spawn_frame = spawn;
  a.end_frame = spawn + static_cast<int>(pts.size()) - 1;
  a.trajectory = std::move(pts);
  return a;
}

}  // namespace

TEST_CASE("cell centers round-trip through world coordinates") {
  RasterGeometry g = grid(7, 5, 0.5);
  g.origin = {-3.0, 2.0};
  const GridRaster r(g);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 7; ++x) CHECK(r.world_to_cell(r.cell_center({x, y})) == Cell{x, y});
  }
  CHECK_THROWS_AS(GridRaster(grid(0, 3)), InputError);
}

TEST_CASE("appearance map marks first and last coordinates only") {
  const std::vector<Agent> agents = {walker(0, {{3.5, 4.5}, {5.5, 2.5}, {7.5, 1.5}})};
  const GridRaster m = derive_appearance_map(agents, grid(10, 10));
  CHECK(m.sum() == 2.0);
  CHECK(m.at(3, 4) == 1.0);
  CHECK(m.at(7, 1) == 1.0);
  CHECK(derive_appearance_map({}, grid(10, 10)).sum() == 0.0);
}

TEST_CASE("appearance map matches a mark-and-compare oracle") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> c(0.0, 10.0);
  std::vector<Agent> agents;
  for (int i = 0; i < 5; ++i) agents.push_back(walker(i, {{c(rng), c(rng)}, {c(rng), c(rng)}, {c(rng), c(rng)}}));
  const GridRaster m = derive_appearance_map(agents, grid(10, 10));
  std::vector<int> expected(100, 0);
  for (const Agent& a : agents) {
    for (const Vec2& p : {a.start(), a.destination()}) expected[static_cast<int>(p.y) * 10 + static_cast<int>(p.x)] = 1;
  }
  for (int i = 0; i < 100; ++i) CHECK(m.values()[i] == expected[i]);
}

TEST_CASE("out-of-bounds agents are rejected by id") {
  const std::vector<Agent> agents = {walker(42, {{1.0, 1.0}, {12.0, 1.0}})};
  CHECK_THROWS_WITH_AS(derive_appearance_map(agents, grid(10, 10)), doctest::Contains("42"), OutOfBoundsError);
  CHECK_THROWS_AS(derive_density_map(agents, grid(10, 10)), OutOfBoundsError);
}

TEST_CASE("density map is log-normalized visit counts") {
  SUBCASE("single static agent") {
    const std::vector<Agent> agents = {walker(0, std::vector<Vec2>(10, {2.5, 2.5}))};
    const GridRaster d = derive_density_map(agents, grid(5, 5));
    CHECK(d.at(2, 2) == 1.0);
    CHECK(d.sum() == 1.0);
  }
  SUBCASE("counts 9 and 99") {
    const std::vector<Agent> agents = {walker(0, std::vector<Vec2>(9, {0.5, 0.5})),
                                       walker(1, std::vector<Vec2>(99, {3.5, 0.5}))};
    const GridRaster d = derive_density_map(agents, grid(5, 5));
    CHECK(d.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.at(3, 0) == 1.0);
  }
  SUBCASE("no agents") { CHECK(derive_density_map({}, grid(5, 5)).sum() == 0.0); }
}

TEST_CASE("density is monotone in visits while the maximum cell is unchanged") {
  std::vector<Agent> agents = {walker(0, std::vector<Vec2>(50, {0.5, 0.5})), walker(1, std::vector<Vec2>(3, {2.5, 2.5}))};
  const double before = derive_density_map(agents, grid(5, 5)).at(2, 2);
  agents.push_back(walker(2, std::vector<Vec2>(4, {2.5, 2.5})));
  const GridRaster after = derive_density_map(agents, grid(5, 5));
  CHECK(after.at(2, 2) > before);
  CHECK(after.max_value() == 1.0);
}

TEST_CASE("population probability counts concurrent agents per frame") {
  Scenario s;
  s.total_frames = 20;
  s.agents.push_back(walker(0, std::vector<Vec2>(20, {1, 1})));
  s.agents.push_back(walker(1, std::vector<Vec2>(20, {2, 1})));
  auto p = derive_population_prob(s, 4);
  CHECK(p[2] == 1.0);
  CHECK_THROWS_AS(derive_population_prob(s, 2), InputError);

  Scenario t;
  t.total_frames = 20;
  t.agents.push_back(walker(0, std::vector<Vec2>(20, {1, 1})));
  t.agents.push_back(walker(1, std::vector<Vec2>(10, {2, 1}), 10));
  t.agents.push_back(walker(2, std::vector<Vec2>(10, {3, 1}), 10));
  p = derive_population_prob(t, 5);
  CHECK(p[1] == 0.5);
  CHECK(p[3] == 0.5);
}

TEST_CASE("population probability matches a per-frame oracle and ignores agent order") {
  Scenario s = crowdes::testing::random_scenario(8, 30, 100);
  const int k = default_population_support(s);
  const auto p = derive_population_prob(s, k);
  std::vector<double> oracle(k, 0.0);
  for (int t = 0; t < s.total_frames; ++t) {
    int n = 0;
    for (const Agent& a : s.agents) n += a.alive_at(t) ? 1 : 0;
    oracle[n] += 1.0 / s.total_frames;
  }
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    CHECK(p[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
    sum += p[i];
  }
  CHECK(std::abs(sum - 1.0) <= 1e-9);
  std::reverse(s.agents.begin(), s.agents.end());
  CHECK(derive_population_prob(s, k) == p);
}

TEST_CASE("traversable map excludes buildings, structures and bushes") {
  GridRaster seg(grid(7, 1), 0.0);
  for (int c = 0; c < 7; ++c) seg.at(c, 0) = c;
  const GridRaster t = derive_traversable_map(seg);
  for (int c = 0; c < 7; ++c) CHECK(t.at(c, 0) == (c <= 2 ? 0.0 : 1.0));
  CHECK(derive_traversable_map(GridRaster(grid(3, 3), 5.0)).sum() == 9.0);
  CHECK(derive_traversable_map(GridRaster(grid(3, 3), 0.0)).sum() == 0.0);
  seg.at(3, 0) = 9.0;
  CHECK_THROWS_AS(derive_traversable_map(seg), InputError);
}

TEST_CASE("layout derivation is idempotent and valid") {
  const auto f = crowdes::testing::corridor_fixture(2, 600);
  const SceneLayout a = derive_layout(f.segmentation, f.scenario);
  const SceneLayout b = derive_layout(f.segmentation, f.scenario);
  CHECK(a.appearance == b.appearance);
  CHECK(a.traversable == b.traversable);
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("raster files round-trip") {
  RasterGeometry g = grid(6, 4, 0.5);
  g.origin = {1.0, -2.0};
  GridRaster r(g, 0.0);
  r.at(2, 3) = 6.0;
  r.at(5, 0) = 1.0;
  const std::string pgm = "/tmp/crowdes_unit_raster.pgm";
  write_pgm(pgm, r);
  CHECK(read_pgm(pgm, 0.5, {1.0, -2.0}) == r);
  GridRaster d(g, 0.25);
  d.at(1, 1) = 1.0 / 3.0;
  const std::string txt = "/tmp/crowdes_unit_raster.txt";
  write_text_grid(txt, d);
  const GridRaster back = read_text_grid(txt);
  CHECK(back.geometry() == g);
  CHECK(back.at(1, 1) == 1.0 / 3.0);
}
