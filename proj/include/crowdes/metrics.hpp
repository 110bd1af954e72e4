#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crowdes/geometry.hpp"
#include "crowdes/trajectory.hpp"

namespace crowdes {

// Exact 1-Wasserstein distance between two empirical distributions (integral of the
// absolute CDF difference). Throws InputError on an empty input.
double emd_1d(std::span<const double> a, std::span<const double> b);

// Q x Q quadrats over a fixed box; points outside are clamped into the border quadrats.
struct QuadratGrid {
  Bounds box;
  int q = 10;
  int index(const Vec2& p) const;
};

// Frames sampled once per second: 0, s, 2s, ... with s = round(fps).
std::vector<int> sampled_frames(const Scenario& scenario);

struct SceneSeries {
  std::vector<double> dens;  // agents per quadrat
  std::vector<double> freq;  // distinct kinds per quadrat, empty quadrats count 0
  std::vector<double> cov;   // fraction of occupied quadrats
  std::vector<double> pop;   // agents alive
};

// Per-sampled-second agent counts per quadrat.
std::vector<std::vector<int>> quadrat_counts(const Scenario& scenario, const QuadratGrid& grid);
SceneSeries scene_series(const Scenario& scenario, const QuadratGrid& grid);

struct SceneMetrics {
  double dens = 0.0;
  double freq = 0.0;
  double cov = 0.0;
  double pop = 0.0;
};

// Quadrats span the ground-truth bounding box. Throws InputError on mismatched scene ids.
SceneMetrics metric_scene(const Scenario& gen, const Scenario& gt, int q = 10);

struct KinematicSamples {
  std::vector<double> distance;      // per agent, m
  std::vector<double> speed;         // per step, m/s
  std::vector<double> acceleration;  // per step, m/s^2
  std::vector<double> duration;      // per agent, s
};
KinematicSamples kinematic_samples(const Scenario& scenario);

// Mean of the four EMDs after dividing both sides by the ground-truth mean; components whose
// ground-truth mean is 0 (or with no samples) are skipped and named in `warnings`.
double metric_kinem(const Scenario& gen, const Scenario& gt, std::vector<std::string>* warnings = nullptr);

// Classic full-alignment DTW over Euclidean point costs, divided by fps.
double dtw(std::span<const Vec2> a, std::span<const Vec2> b, double fps);

struct DtwDiv {
  double dtw = 0.0;
  double div = 0.0;
};
// Both directions averaged; diversity counts distinct nearest targets over the target size.
DtwDiv metric_dtw_div(const Scenario& gen, const Scenario& gt, double fps);
// Same from a precomputed matrix d[i][j] = DTW(gen_i, gt_j).
DtwDiv dtw_div_from_matrix(const std::vector<std::vector<double>>& d);

double metric_col(const Scenario& gen);

struct MetricsReport {
  double dens = 0.0, freq = 0.0, cov = 0.0, pop = 0.0;
  double kinem = 0.0, dtw = 0.0, div = 0.0, col = 0.0;
  int repetitions = 0;
  std::string gen_scene;
  std::string gt_scene;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> warnings;

  static std::string csv_header();
  std::string csv_row() const;
  std::string table() const;
};

struct EvalOptions {
  int q = 10;
  int threads = 0;  // 0: hardware concurrency
};

// Each generated scenario is truncated to the ground-truth duration; all eight metrics are
// computed per repetition and averaged.
MetricsReport evaluate(const std::vector<Scenario>& gens, const Scenario& gt, const EvalOptions& options = {});

// Slow direct implementations used for --oracle cross-checks on small inputs.
SceneSeries scene_series_direct(const Scenario& scenario, const QuadratGrid& grid);
double metric_col_direct(const Scenario& gen);

}  // namespace crowdes
