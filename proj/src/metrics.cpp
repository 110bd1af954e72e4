#include "crowdes/metrics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "crowdes/error.hpp"

namespace crowdes {

double emd_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("EMD needs two non-empty sample sets");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double total = 0.0;
  double prev = std::min(x.front(), y.front());
  while (i < x.size() || j < y.size()) {
    double next;
    if (j == y.size() || (i < x.size() && x[i] <= y[j])) {
      next = x[i];
    } else {
      next = y[j];
    }
    const double fa = static_cast<double>(i) / na;
    const double fb = static_cast<double>(j) / nb;
    total += std::fabs(fa - fb) * (next - prev);
    while (i < x.size() && x[i] == next) ++i;
    while (j < y.size() && y[j] == next) ++j;
    prev = next;
  }
  return total;
}

int QuadratGrid::index(const Vec2& p) const {
  auto axis = [&](double v, double lo, double hi) {
    const double span = hi - lo;
    if (!(span > 0.0)) return 0;
    const int k = static_cast<int>(std::floor((v - lo) / span * q));
    return std::clamp(k, 0, q - 1);
  };
  return axis(p.y, box.min.y, box.max.y) * q + axis(p.x, box.min.x, box.max.x);
}

std::vector<int> sampled_frames(const Scenario& scenario) {
  const int step = std::max(1, static_cast<int>(std::lround(scenario.fps)));
  std::vector<int> frames;
  for (int t = 0; t < scenario.total_frames; t += step) frames.push_back(t);
  return frames;
}

std::vector<std::vector<int>> quadrat_counts(const Scenario& scenario, const QuadratGrid& grid) {
  const std::vector<int> frames = sampled_frames(scenario);
  std::vector<std::vector<int>> counts(frames.size(), std::vector<int>(static_cast<std::size_t>(grid.q * grid.q), 0));
  const int step = frames.size() > 1 ? frames[1] : 1;
  for (const Agent& a : scenario.agents) {
    const int first = (a.spawn_frame + step - 1) / step;
    for (int k = first; k < static_cast<int>(frames.size()) && frames[static_cast<std::size_t>(k)] <= a.end_frame; ++k) {
      ++counts[static_cast<std::size_t>(k)][static_cast<std::size_t>(grid.index(a.position_at(frames[static_cast<std::size_t>(k)])))];
    }
  }
  return counts;
}

SceneSeries scene_series(const Scenario& scenario, const QuadratGrid& grid) {
  const std::vector<int> frames = sampled_frames(scenario);
  const std::size_t cells = static_cast<std::size_t>(grid.q * grid.q);
  const double qq = static_cast<double>(cells);
  SceneSeries s;
  const int step = frames.size() > 1 ? frames[1] : 1;
  std::vector<std::vector<int>> counts(frames.size(), std::vector<int>(cells, 0));
  std::vector<std::vector<unsigned>> kinds(frames.size(), std::vector<unsigned>(cells, 0u));
  for (const Agent& a : scenario.agents) {
    const int first = (a.spawn_frame + step - 1) / step;
    for (int k = first; k < static_cast<int>(frames.size()) && frames[static_cast<std::size_t>(k)] <= a.end_frame; ++k) {
      const auto c = static_cast<std::size_t>(grid.index(a.position_at(frames[static_cast<std::size_t>(k)])));
      ++counts[static_cast<std::size_t>(k)][c];
      kinds[static_cast<std::size_t>(k)][c] |= 1u << static_cast<unsigned>(a.kind);
    }
  }
  for (std::size_t k = 0; k < frames.size(); ++k) {
    double n = 0.0, distinct = 0.0, occupied = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
      n += counts[k][c];
      distinct += std::popcount(kinds[k][c]);
      occupied += counts[k][c] > 0 ? 1.0 : 0.0;
    }
    s.dens.push_back(n / qq);
    s.freq.push_back(distinct / qq);
    s.cov.push_back(occupied / qq);
    s.pop.push_back(n);
  }
  return s;
}

SceneSeries scene_series_direct(const Scenario& scenario, const QuadratGrid& grid) {
  SceneSeries s;
  const double qq = static_cast<double>(grid.q * grid.q);
  for (int t : sampled_frames(scenario)) {
    double n = 0.0, distinct = 0.0, occupied = 0.0;
    for (int cell = 0; cell < grid.q * grid.q; ++cell) {
      int count = 0;
      std::set<AgentKind> kinds;
      for (const Agent& a : scenario.agents) {
        if (a.alive_at(t) && grid.index(a.position_at(t)) == cell) {
          ++count;
          kinds.insert(a.kind);
        }
      }
      n += count;
      distinct += static_cast<double>(kinds.size());
      occupied += count > 0 ? 1.0 : 0.0;
    }
    s.dens.push_back(n / qq);
    s.freq.push_back(distinct / qq);
    s.cov.push_back(occupied / qq);
    s.pop.push_back(n);
  }
  return s;
}

namespace {

// An empty series (zero-duration scenario) compares as a single zero sample.
double series_emd(const std::vector<double>& a, const std::vector<double>& b) {
  static const std::vector<double> zero{0.0};
  return emd_1d(a.empty() ? zero : a, b.empty() ? zero : b);
}

}  // namespace

SceneMetrics metric_scene(const Scenario& gen, const Scenario& gt, int q) {
  if (gen.scene_id != gt.scene_id) {
    throw InputError("scene mismatch: generated '" + gen.scene_id + "' vs ground truth '" + gt.scene_id + "'");
  }
  if (q < 1) throw InputError("quadrat count must be positive");
  QuadratGrid grid{gt.bounds(), q};
  if (grid.box.empty()) grid.box = gen.bounds();
  const SceneSeries a = scene_series(gen, grid);
  const SceneSeries b = scene_series(gt, grid);
  return {series_emd(a.dens, b.dens), series_emd(a.freq, b.freq), series_emd(a.cov, b.cov),
          series_emd(a.pop, b.pop)};
}

KinematicSamples kinematic_samples(const Scenario& scenario) {
  KinematicSamples k;
  const double fps = scenario.fps;
  for (const Agent& a : scenario.agents) {
    const auto& t = a.trajectory;
    k.distance.push_back(polyline_length(t));
    k.duration.push_back(static_cast<double>(a.duration_frames()) / fps);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) k.speed.push_back(distance(t[i + 1], t[i]) * fps);
    for (std::size_t i = 0; i + 2 < t.size(); ++i) {
      k.acceleration.push_back(norm(t[i + 2] - 2.0 * t[i + 1] + t[i]) * fps * fps);
    }
  }
  return k;
}

double metric_kinem(const Scenario& gen, const Scenario& gt, std::vector<std::string>* warnings) {
  const KinematicSamples g = kinematic_samples(gen);
  const KinematicSamples r = kinematic_samples(gt);
  const std::pair<const char*, std::pair<const std::vector<double>*, const std::vector<double>*>> parts[] = {
      {"distance", {&g.distance, &r.distance}},
      {"velocity", {&g.speed, &r.speed}},
      {"acceleration", {&g.acceleration, &r.acceleration}},
      {"time", {&g.duration, &r.duration}},
  };
  double sum = 0.0;
  int used = 0;
  for (const auto& [name, sets] : parts) {
    const auto& [gs, rs] = sets;
    if (gs->empty() || rs->empty()) {
      if (warnings != nullptr) warnings->push_back(std::string("kinematics: no ") + name + " samples, component skipped");
      continue;
    }
    double mean = 0.0;
    for (double v : *rs) mean += v;
    mean /= static_cast<double>(rs->size());
    if (mean == 0.0) {
      if (warnings != nullptr) {
        warnings->push_back(std::string("kinematics: ground-truth mean ") + name + " is 0, component skipped");
      }
      continue;
    }
    std::vector<double> a(*gs), b(*rs);
    for (double& v : a) v /= mean;
    for (double& v : b) v /= mean;
    sum += emd_1d(a, b);
    ++used;
  }
  return used > 0 ? sum / used : 0.0;
}

double dtw(std::span<const Vec2> a, std::span<const Vec2> b, double fps) {
  if (a.empty() || b.empty()) throw InputError("DTW needs non-empty trajectories");
  const std::size_t m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double best = std::min({prev[j - 1], prev[j], cur[j - 1]});
      cur[j] = best + distance(a[i - 1], b[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m] / fps;
}

DtwDiv dtw_div_from_matrix(const std::vector<std::vector<double>>& d) {
  if (d.empty() || d.front().empty()) throw InputError("DTW metric needs non-empty scenarios");
  const std::size_t ng = d.size();
  const std::size_t nt = d.front().size();
  double forward = 0.0, backward = 0.0;
  std::set<std::size_t> hit_gt, hit_gen;
  for (std::size_t i = 0; i < ng; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < nt; ++j) {
      if (d[i][j] < d[i][best]) best = j;
    }
    forward += d[i][best];
    hit_gt.insert(best);
  }
  for (std::size_t j = 0; j < nt; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < ng; ++i) {
      if (d[i][j] < d[best][j]) best = i;
    }
    backward += d[best][j];
    hit_gen.insert(best);
  }
  DtwDiv out;
  out.dtw = 0.5 * (forward / static_cast<double>(ng) + backward / static_cast<double>(nt));
  out.div = 0.5 * (static_cast<double>(hit_gt.size()) / static_cast<double>(nt) +
                   static_cast<double>(hit_gen.size()) / static_cast<double>(ng));
  return out;
}

DtwDiv metric_dtw_div(const Scenario& gen, const Scenario& gt, double fps) {
  if (gen.agents.empty() || gt.agents.empty()) throw InputError("DTW metric needs non-empty scenarios");
  std::vector<std::vector<double>> d(gen.agents.size(), std::vector<double>(gt.agents.size()));
  for (std::size_t i = 0; i < gen.agents.size(); ++i) {
    for (std::size_t j = 0; j < gt.agents.size(); ++j) {
      d[i][j] = dtw(gen.agents[i].trajectory, gt.agents[j].trajectory, fps);
    }
  }
  return dtw_div_from_matrix(d);
}

double metric_col(const Scenario& gen) {
  if (gen.agents.empty() || gen.total_frames <= 0) return 0.0;
  std::vector<std::vector<int>> alive(static_cast<std::size_t>(gen.total_frames));
  for (int i = 0; i < static_cast<int>(gen.agents.size()); ++i) {
    const Agent& a = gen.agents[static_cast<std::size_t>(i)];
    for (int t = std::max(a.spawn_frame, 0); t <= std::min(a.end_frame, gen.total_frames - 1); ++t) {
      alive[static_cast<std::size_t>(t)].push_back(i);
    }
  }
  long flagged = 0;
  std::vector<char> hit;
  for (int t = 0; t < gen.total_frames; ++t) {
    const auto& ids = alive[static_cast<std::size_t>(t)];
    hit.assign(ids.size(), 0);
    for (std::size_t x = 0; x < ids.size(); ++x) {
      const Vec2 p = gen.agents[static_cast<std::size_t>(ids[x])].position_at(t);
      for (std::size_t y = x + 1; y < ids.size(); ++y) {
        if (distance(p, gen.agents[static_cast<std::size_t>(ids[y])].position_at(t)) < 0.2) {
          hit[x] = 1;
          hit[y] = 1;
        }
      }
    }
    for (char h : hit) flagged += h;
  }
  return 100.0 * static_cast<double>(flagged) /
         (static_cast<double>(gen.total_frames) * static_cast<double>(gen.agents.size()));
}

double metric_col_direct(const Scenario& gen) {
  if (gen.agents.empty() || gen.total_frames <= 0) return 0.0;
  long flagged = 0;
  for (int t = 0; t < gen.total_frames; ++t) {
    for (std::size_t i = 0; i < gen.agents.size(); ++i) {
      if (!gen.agents[i].alive_at(t)) continue;
      for (std::size_t j = 0; j < gen.agents.size(); ++j) {
        if (j != i && gen.agents[j].alive_at(t) &&
            distance(gen.agents[i].position_at(t), gen.agents[j].position_at(t)) < 0.2) {
          ++flagged;
          break;
        }
      }
    }
  }
  return 100.0 * static_cast<double>(flagged) /
         (static_cast<double>(gen.total_frames) * static_cast<double>(gen.agents.size()));
}

std::string MetricsReport::csv_header() { return "dens,freq,cov,pop,kinem,dtw,div,col"; }

std::string MetricsReport::csv_row() const {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", dens, freq, cov, pop, kinem, dtw, div,
                col);
  return buf;
}

std::string MetricsReport::table() const {
  std::ostringstream out;
  char buf[128];
  const std::pair<const char*, double> rows[] = {{"Dens.", dens}, {"Freq.", freq}, {"Cov.", cov},
                                                 {"Pop.", pop},   {"Kinem.", kinem}, {"DTW", dtw},
                                                 {"Div.", div},   {"Col.", col}};
  out << "scene " << gt_scene << ", " << repetitions << " repetition(s)\n";
  for (const auto& [name, value] : rows) {
    std::snprintf(buf, sizeof buf, "  %-7s %12.6f\n", name, value);
    out << buf;
  }
  return out.str();
}

MetricsReport evaluate(const std::vector<Scenario>& gens, const Scenario& gt, const EvalOptions& options) {
  if (gens.empty()) throw InputError("evaluation needs at least one repetition");
  std::vector<MetricsReport> per(gens.size());
  auto run = [&](std::size_t r) {
    const Scenario g = truncate_scenario(gens[r], gt.total_frames);
    MetricsReport& m = per[r];
    const SceneMetrics s = metric_scene(g, gt, options.q);
    m.dens = s.dens;
    m.freq = s.freq;
    m.cov = s.cov;
    m.pop = s.pop;
    m.kinem = metric_kinem(g, gt, &m.warnings);
    if (g.agents.empty() || gt.agents.empty()) {
      m.dtw = 0.0;
      m.div = 0.0;
      m.warnings.push_back("DTW and diversity undefined for an empty scenario; reported as 0");
    } else {
      const DtwDiv d = metric_dtw_div(g, gt, gt.fps);
      m.dtw = d.dtw;
      m.div = d.div;
    }
    m.col = metric_col(g);
  };
  unsigned threads = options.threads > 0 ? static_cast<unsigned>(options.threads) : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(gens.size())));
  if (threads == 1) {
    for (std::size_t r = 0; r < gens.size(); ++r) run(r);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < gens.size(); r += threads) run(r);
      });
    }
    for (auto& t : pool) t.join();
  }
  MetricsReport out;
  out.repetitions = static_cast<int>(gens.size());
  out.gen_scene = gens.front().scene_id;
  out.gt_scene = gt.scene_id;
  const double n = static_cast<double>(gens.size());
  for (const MetricsReport& m : per) {
    out.dens += m.dens / n;
    out.freq += m.freq / n;
    out.cov += m.cov / n;
    out.pop += m.pop / n;
    out.kinem += m.kinem / n;
    out.dtw += m.dtw / n;
    out.div += m.div / n;
    out.col += m.col / n;
    for (const auto& w : m.warnings) {
      if (std::find(out.warnings.begin(), out.warnings.end(), w) == out.warnings.end()) out.warnings.push_back(w);
    }
  }
  return out;
}

}  // namespace crowdes
