#include "crowdes/render.hpp"

#include <cstdio>
#include <sstream>

namespace crowdes {

namespace {

const char* class_color(int c) {
  static const char* kColors[] = {"#8c8c8c", "#a89f91", "#6b8e4e", "#9acd67", "#3f6b35", "#e6e2d3", "#5a5a5a"};
  return c >= 0 && c < 7 ? kColors[c] : "#ffffff";
}

const char* kind_color(AgentKind kind) {
  switch (kind) {
    case AgentKind::kPedestrian: return "#d62728";
    case AgentKind::kBicyclist: return "#1f77b4";
    case AgentKind::kSkateboarder: return "#ff7f0e";
    case AgentKind::kCar: return "#9467bd";
    case AgentKind::kCart: return "#8c564b";
    case AgentKind::kBus: return "#17becf";
  }
  return "#000000";
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string render_svg(const Scenario& scenario, const SceneLayout& layout, const RenderOptions& options) {
  const RasterGeometry& g = layout.geometry();
  const double s = options.pixels_per_meter;
  const double height = g.height_cells * g.cell_size;
  auto px = [&](const Vec2& p) { return num((p.x - g.origin.x) * s) + "," + num((height - (p.y - g.origin.y)) * s); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(g.width_cells * g.cell_size * s)
      << "\" height=\"" << num(height * s) << "\">\n<g id=\"layout\">\n";
  const double cell = g.cell_size * s;
  for (int y = 0; y < g.height_cells; ++y) {
    for (int x = 0; x < g.width_cells; ++x) {
      const int c = static_cast<int>(layout.segmentation.at(x, y));
      out << "<rect x=\"" << num(x * cell) << "\" y=\"" << num((g.height_cells - 1 - y) * cell) << "\" width=\""
          << num(cell) << "\" height=\"" << num(cell) << "\" fill=\"" << class_color(c) << "\"/>\n";
    }
  }
  out << "</g>\n<g id=\"agents\" fill=\"none\" stroke-width=\"1.5\">\n";
  for (const Agent& a : scenario.agents) {
    out << "<polyline data-id=\"" << a.id << "\" data-kind=\"" << kind_name(a.kind) << "\" stroke=\""
        << kind_color(a.kind) << "\" points=\"";
    for (std::size_t i = 0; i < a.trajectory.size(); ++i) out << (i ? " " : "") << px(a.trajectory[i]);
    out << "\"/>\n";
  }
  out << "</g>\n";
  if (options.markers) {
    out << "<g id=\"markers\">\n";
    for (const Agent& a : scenario.agents) {
      if (a.trajectory.empty()) continue;
      const std::string spawn = px(a.start());
      const std::string goal = px(a.destination());
      out << "<circle class=\"spawn\" cx=\"" << spawn.substr(0, spawn.find(',')) << "\" cy=\""
          << spawn.substr(spawn.find(',') + 1) << "\" r=\"2\" fill=\"#2ca02c\"/>\n";
      out << "<circle class=\"goal\" cx=\"" << goal.substr(0, goal.find(',')) << "\" cy=\""
          << goal.substr(goal.find(',') + 1) << "\" r=\"2\" fill=\"#000000\"/>\n";
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace crowdes
