#include "crowdes/behavior_vocab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "crowdes/error.hpp"
#include "crowdes/rng.hpp"

namespace crowdes {

namespace {
constexpr double kDegenerateDistance = 1e-6;
}

SimilarityTransform canonical_transform(const Vec2& origin, const Vec2& control, double pace,
                                        double fallback_heading,
                                        const CanonicalFrameOptions& options) {
  SimilarityTransform t;
  t.origin = origin;
  const Vec2 d = control - origin;
  const double dist = norm(d);
  if (dist < kDegenerateDistance) {
    t.cos_theta = std::cos(fallback_heading);
    t.sin_theta = std::sin(fallback_heading);
    t.scale = 1.0;
    return t;
  }
  t.cos_theta = d.x / dist;
  t.sin_theta = d.y / dist;
  if (options.scale_mode == ScaleMode::kControlDistance) {
    t.scale = dist;
  } else {
    const double reach = pace * options.horizon_s;
    t.scale = reach > kDegenerateDistance ? reach : 1.0;
  }
  return t;
}

double last_heading(const std::vector<Vec2>& history) {
  for (std::size_t i = history.size(); i-- > 1;) {
    const Vec2 d = history[i] - history[i - 1];
    if (norm(d) > kDegenerateDistance) return std::atan2(d.y, d.x);
  }
  return 0.0;
}

std::vector<double> MotionSegment::flat() const {
  std::vector<double> out;
  out.reserve(coords.size() * 2);
  for (const Vec2& p : coords) {
    out.push_back(p.x);
    out.push_back(p.y);
  }
  return out;
}

Vec2 navigation_control_point(const NavGraph* graph, const Vec2& position, const Vec2& destination,
                              double pace, double horizon_s, bool use_navmesh) {
  Polyline path{position, destination};
  if (use_navmesh && graph != nullptr) {
    try {
      path = shortest_path(*graph, position, destination);
    } catch (const NoPathError&) {
      // Unreachable destinations fall back to the straight line.
    }
  }
  return control_point(path, position, pace, horizon_s);
}

std::vector<MotionSegment> segment_and_normalize(const Scenario& scenario, const NavGraph* graph,
                                                 const SegmentOptions& options) {
  const int tf = options.segment_frames;
  if (tf < 1) throw InputError("segment length must be >= 1");
  std::vector<MotionSegment> segments;
  for (int ai = 0; ai < static_cast<int>(scenario.agents.size()); ++ai) {
    const Agent& agent = scenario.agents[ai];
    const auto& traj = agent.trajectory;
    for (int k = 0; k + tf < static_cast<int>(traj.size()); k += tf) {
      const Vec2 origin = traj[k];
      const Vec2 control = navigation_control_point(graph, origin, agent.destination(), agent.pace,
                                                    options.frame.horizon_s, options.use_navmesh);
      const std::vector<Vec2> history(traj.begin(), traj.begin() + k + 1);
      MotionSegment seg;
      seg.transform = canonical_transform(origin, control, agent.pace, last_heading(history), options.frame);
      seg.control = control;
      seg.agent_index = ai;
      seg.origin_frame = agent.spawn_frame + k;
      for (int j = 1; j <= tf; ++j) seg.coords.push_back(seg.transform.to_canonical(traj[k + j]));
      segments.push_back(std::move(seg));
    }
  }
  return segments;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

int assign_state(const std::vector<double>& sample, const BehaviorVocab& vocab) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int b = 0; b < vocab.size(); ++b) {
    const double d = squared_distance(sample, vocab.centers[b]);
    if (d < best_d) {
      best_d = d;
      best = b;
    }
  }
  return best;
}

KMeansResult kmeans_fit(const std::vector<std::vector<double>>& samples, int num_states,
                        int max_iters, std::uint64_t seed) {
  if (num_states < 1) throw InputError("number of behavior states must be >= 1");
  if (static_cast<int>(samples.size()) < num_states) {
    throw InputError("k-means needs at least B=" + std::to_string(num_states) + " segments, got " +
                     std::to_string(samples.size()));
  }
  const std::set<std::vector<double>> distinct(samples.begin(), samples.end());
  if (static_cast<int>(distinct.size()) < num_states) {
    throw InputError("k-means needs at least B distinct segments");
  }
  const std::size_t dim = samples.front().size();
  const std::size_t n = samples.size();
  Rng rng = named_stream(seed, "kmeans");

  // k-means++ seeding.
  std::vector<std::vector<double>> centers;
  centers.push_back(samples[rng() % n]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(samples[i], centers[0]);
  while (static_cast<int>(centers.size()) < num_states) {
    double total = 0.0;
    for (double v : d2) total += v;
    double target = uniform01(rng) * total;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      target -= d2[i];
      if (target < 0.0) {
        pick = i;
        break;
      }
    }
    while (d2[pick] <= 0.0) pick = (pick + n - 1) % n;
    centers.push_back(samples[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(samples[i], centers.back()));
  }

  KMeansResult result;
  result.vocab.segment_frames = static_cast<int>(dim / 2);
  result.vocab.centers = centers;
  std::vector<int> assignment(n, -1);
  auto assign_all = [&]() {
    bool changed = false;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int b = assign_state(samples[i], result.vocab);
      if (b != assignment[i]) changed = true;
      assignment[i] = b;
      sse += squared_distance(samples[i], result.vocab.centers[b]);
    }
    return std::pair{changed, sse};
  };
  result.sse_history.push_back(assign_all().second);
  for (int it = 0; it < max_iters; ++it) {
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(num_states), std::vector<double>(dim, 0.0));
    std::vector<int> counts(static_cast<std::size_t>(num_states), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[assignment[i]][d] += samples[i][d];
    }
    for (int b = 0; b < num_states; ++b) {
      if (counts[b] == 0) continue;  // an empty cluster keeps its center
      for (std::size_t d = 0; d < dim; ++d) result.vocab.centers[b][d] = sums[b][d] / counts[b];
    }
    const auto [changed, sse] = assign_all();
    result.sse_history.push_back(sse);
    result.iterations = it + 1;
    if (!changed) {
      result.converged = true;
      break;
    }
  }
  return result;
}

std::vector<double> straight_segment(int segment_frames) {
  std::vector<double> out;
  for (int j = 1; j <= segment_frames; ++j) {
    out.push_back(static_cast<double>(j) / segment_frames);
    out.push_back(0.0);
  }
  return out;
}

void write_vocab(const std::string& path, const BehaviorVocab& vocab) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write vocab: " + path);
  out << vocab.size() << ' ' << vocab.segment_frames << '\n';
  char buf[40];
  for (const auto& c : vocab.centers) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.17g", i ? " " : "", c[i]);
      out << buf;
    }
    out << '\n';
  }
}

BehaviorVocab read_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open vocab: " + path);
  BehaviorVocab vocab;
  int b = 0;
  if (!(in >> b >> vocab.segment_frames) || b < 1 || vocab.segment_frames < 1) {
    throw InputError(path + ":1: malformed vocab header");
  }
  for (int i = 0; i < b; ++i) {
    std::vector<double> c(static_cast<std::size_t>(2 * vocab.segment_frames));
    for (double& v : c) {
      if (!(in >> v)) throw InputError(path + ": truncated vocab center " + std::to_string(i));
    }
    vocab.centers.push_back(std::move(c));
  }
  return vocab;
}

}  // namespace crowdes
