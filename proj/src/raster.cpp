#include "crowdes/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "crowdes/error.hpp"

namespace crowdes {

Bounds RasterGeometry::bounds() const {
  Bounds b;
  b.extend(origin);
  b.extend(origin + extent());
  return b;
}

void RasterGeometry::validate() const {
  if (width_cells <= 0 || height_cells <= 0) throw InputError("raster dimensions must be positive");
  if (!(cell_size > 0.0)) throw InputError("raster cell_size must be > 0");
}

GridRaster::GridRaster(const RasterGeometry& geometry, double fill) : geometry_(geometry) {
  geometry_.validate();
  values_.assign(static_cast<std::size_t>(width()) * static_cast<std::size_t>(height()), fill);
}

GridRaster::GridRaster(const RasterGeometry& geometry, std::vector<double> values)
    : geometry_(geometry), values_(std::move(values)) {
  geometry_.validate();
  if (values_.size() != static_cast<std::size_t>(width()) * static_cast<std::size_t>(height())) {
    throw InputError("raster value count does not match width*height");
  }
}

Cell GridRaster::world_to_cell(const Vec2& world) const {
  const Vec2 local = (world - origin()) / cell_size();
  return {static_cast<int>(std::floor(local.x)), static_cast<int>(std::floor(local.y))};
}

Vec2 GridRaster::cell_center(const Cell& c) const {
  return origin() + Vec2{(c.x + 0.5) * cell_size(), (c.y + 0.5) * cell_size()};
}

double GridRaster::sample(const Vec2& world, double fallback) const {
  const Cell c = world_to_cell(world);
  return contains(c) ? at(c) : fallback;
}

double GridRaster::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double GridRaster::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

namespace {

// Reads the next whitespace/comment-delimited token of a PNM header.
std::string next_pnm_token(std::istream& in) {
  std::string token;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string discard;
      std::getline(in, discard);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(c);
  }
  return token;
}

}  // namespace

GridRaster read_pgm(const std::string& path, double cell_size, Vec2 origin) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open raster: " + path);
  if (next_pnm_token(in) != "P5") throw InputError(path + ": not a binary PGM (P5)");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_pnm_token(in));
    height = std::stoi(next_pnm_token(in));
    maxval = std::stoi(next_pnm_token(in));
  } catch (const std::exception&) {
    throw InputError(path + ": malformed PGM header");
  }
  if (maxval <= 0 || maxval > 255) throw InputError(path + ": only 8-bit PGM is supported");
  RasterGeometry geometry{width, height, cell_size, origin};
  geometry.validate();
  std::vector<unsigned char> bytes(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw InputError(path + ": truncated PGM pixel data");
  }
  std::vector<double> values(bytes.begin(), bytes.end());
  return GridRaster(geometry, std::move(values));
}

void write_pgm(const std::string& path, const GridRaster& raster) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write raster: " + path);
  out << "P5\n" << raster.width() << ' ' << raster.height() << "\n255\n";
  std::vector<unsigned char> bytes(raster.size());
  std::transform(raster.values().begin(), raster.values().end(), bytes.begin(), [](double v) {
    return static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
  });
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

GridRaster read_text_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open grid: " + path);
  RasterGeometry geometry;
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  if (!(hs >> geometry.width_cells >> geometry.height_cells >> geometry.cell_size >>
        geometry.origin.x >> geometry.origin.y)) {
    throw InputError(path + ":1: malformed grid header");
  }
  geometry.validate();
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(geometry.width_cells) * geometry.height_cells);
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    double v = 0.0;
    int count = 0;
    while (ls >> v) {
      values.push_back(v);
      ++count;
    }
    if (!ls.eof()) throw InputError(path + ":" + std::to_string(line_no) + ": malformed value");
    if (count != 0 && count != geometry.width_cells) {
      throw InputError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(geometry.width_cells) + " values");
    }
  }
  return GridRaster(geometry, std::move(values));
}

void write_text_grid(const std::string& path, const GridRaster& raster) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write grid: " + path);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g %.17g\n", raster.width(), raster.height(),
                raster.cell_size(), raster.origin().x, raster.origin().y);
  out << buf;
  for (int y = 0; y < raster.height(); ++y) {
    for (int x = 0; x < raster.width(); ++x) {
      std::snprintf(buf, sizeof buf, "%s%.17g", x ? " " : "", raster.at(x, y));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace crowdes
