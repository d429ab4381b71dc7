#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "trajgrid/common.hpp"
#include "trajgrid/geometry.hpp"

namespace trajgrid {

// Ego frame: +x forward (up-grid, decreasing row), +y left (decreasing col).
struct GridConfig {
  int height = 64;
  int width = 64;
  double resolution = 0.2;  // meters per cell
  CellIdx ego_cell{60, 32};
  double z_min = 0.3;
  double z_max = 2.0;
  double range = 10.0;  // sensing radius, meters

  void validate() const {
    if (height < 8 || width < 8) throw ConfigError("grid must be at least 8x8");
    if (resolution <= 0.0) throw ConfigError("resolution must be positive");
    if (ego_cell.row < 0 || ego_cell.row >= height || ego_cell.col < 0 || ego_cell.col >= width)
      throw ConfigError("ego_cell outside grid");
    if (z_min >= z_max) throw ConfigError("z_min must be below z_max");
    if (range <= 0.0) throw ConfigError("range must be positive");
  }

  static GridConfig sized(int h, int w, double res = 0.2) {
    GridConfig cfg;
    cfg.height = h;
    cfg.width = w;
    cfg.resolution = res;
    cfg.ego_cell = {h - 4, w / 2};
    cfg.range = res * (std::max(h, w) - 8) * 0.5 + res * 24;
    return cfg;
  }

  CellIdx to_cell(double x, double y) const {
    return {ego_cell.row - static_cast<int>(std::lround(x / resolution)),
            ego_cell.col - static_cast<int>(std::lround(y / resolution))};
  }
  // Continuous cell coordinates (cell centers on integers).
  double to_cell_row(double x) const { return ego_cell.row - x / resolution; }
  double to_cell_col(double y) const { return ego_cell.col - y / resolution; }
  Vec2 to_meters(double row, double col) const {
    return {(ego_cell.row - row) * resolution, (ego_cell.col - col) * resolution};
  }

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

// Three mutually exclusive binary masks: per cell exactly one of them is set.
struct OccupancyGrid {
  Mask occupied;
  Mask free;
  Mask unknown;
  GridConfig config;

  static OccupancyGrid all_unknown(const GridConfig& cfg) {
    cfg.validate();
    OccupancyGrid g;
    g.config = cfg;
    g.occupied = Mask(cfg.height, cfg.width, 0);
    g.free = Mask(cfg.height, cfg.width, 0);
    g.unknown = Mask(cfg.height, cfg.width, 1);
    return g;
  }

  void set_occupied(int r, int c) {
    occupied.at(r, c) = 1;
    free.at(r, c) = 0;
    unknown.at(r, c) = 0;
  }
  void set_free(int r, int c) {
    occupied.at(r, c) = 0;
    free.at(r, c) = 1;
    unknown.at(r, c) = 0;
  }
  void set_unknown(int r, int c) {
    occupied.at(r, c) = 0;
    free.at(r, c) = 0;
    unknown.at(r, c) = 1;
  }

  bool exclusive() const {
    for (size_t i = 0; i < occupied.size(); ++i)
      if (occupied[i] + free[i] + unknown[i] != 1) return false;
    return true;
  }
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

struct TrackHistory {
  std::vector<Pose> poses;  // oldest first, last at the ego origin
  Mask raster;              // the Q channel
};

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

// Stack (occupied, free, unknown, history), plane-major, ready for the network.
struct NetworkInput {
  std::vector<float> channels;  // 4 * h * w
  GridConfig config;

  const float* plane(int ch) const {
    return channels.data() + static_cast<size_t>(ch) * config.height * config.width;
  }
  float at(int ch, int r, int c) const {
    return channels[(static_cast<size_t>(ch) * config.height + r) * config.width + c];
  }
};

// Bird's-eye-view projection: points inside the height band become obstacles,
// cells traversed by the ray from the ego to each point's cell are observed
// free. Occupied always wins; the ego's own cell carries no observation.
inline OccupancyGrid project_pointcloud(const std::vector<Point3>& points, const GridConfig& cfg) {
  cfg.validate();
  for (const auto& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw InputError("project_pointcloud: non-finite coordinate");

  OccupancyGrid grid = OccupancyGrid::all_unknown(cfg);
  const CellIdx ego = cfg.ego_cell;

  std::vector<CellIdx> endpoint_cells;
  endpoint_cells.reserve(points.size());
  for (const auto& p : points) {
    if (std::hypot(p.x, p.y) > cfg.range) {
      endpoint_cells.push_back({-1000000, -1000000});  // out of range, skipped
      continue;
    }
    CellIdx cell = cfg.to_cell(p.x, p.y);
    endpoint_cells.push_back(cell);
    if (p.z >= cfg.z_min && p.z <= cfg.z_max && grid.occupied.in_bounds(cell))
      grid.set_occupied(cell.row, cell.col);
  }

  for (size_t i = 0; i < points.size(); ++i) {
    const CellIdx cell = endpoint_cells[i];
    if (cell.row == -1000000) continue;
    visit_supercover(ego.row, ego.col, cell.row, cell.col, [&](int r, int c) {
      if (!grid.free.in_bounds(r, c)) return true;
      if (r == ego.row && c == ego.col) return true;
      if (grid.occupied.at(r, c)) return true;  // occupied wins
      grid.set_free(r, c);
      return true;
    });
  }
  return grid;
}

// Rasterizes the ego track into the Q mask: every pose cell plus the
// supercover of each segment between consecutive poses; out-of-grid parts clip.
inline TrackHistory rasterize_history(const std::vector<Pose>& poses, const GridConfig& cfg) {
  cfg.validate();
  TrackHistory hist;
  hist.poses = poses;
  hist.raster = Mask(cfg.height, cfg.width, 0);
  if (poses.empty()) return hist;

  const Pose& last = poses.back();
  if (std::abs(last.x) > 1e-6 || std::abs(last.y) > 1e-6)
    throw InputError("rasterize_history: last pose must be the ego origin");

  auto mark = [&](int r, int c) {
    if (hist.raster.in_bounds(r, c)) hist.raster.at(r, c) = 1;
    return true;
  };
  for (size_t i = 0; i < poses.size(); ++i) {
    if (i + 1 < poses.size()) {
      visit_supercover(cfg.to_cell_row(poses[i].x), cfg.to_cell_col(poses[i].y),
                       cfg.to_cell_row(poses[i + 1].x), cfg.to_cell_col(poses[i + 1].y), mark);
    } else {
      CellIdx cell = cfg.to_cell(poses[i].x, poses[i].y);
      mark(cell.row, cell.col);
    }
  }
  return hist;
}

inline NetworkInput assemble_input(const OccupancyGrid& grid, const TrackHistory& history) {
  if (history.raster.rows() != grid.config.height || history.raster.cols() != grid.config.width)
    throw DimensionError("assemble_input: history raster does not match grid dimensions");
  NetworkInput input;
  input.config = grid.config;
  const size_t plane = static_cast<size_t>(grid.config.height) * grid.config.width;
  input.channels.resize(4 * plane);
  for (size_t i = 0; i < plane; ++i) {
    input.channels[i] = static_cast<float>(grid.occupied[i]);
    input.channels[plane + i] = static_cast<float>(grid.free[i]);
    input.channels[2 * plane + i] = static_cast<float>(grid.unknown[i]);
    input.channels[3 * plane + i] = static_cast<float>(history.raster[i]);
  }
  return input;
}

// Text point clouds: one "x y z" per line, '#' starts a comment line.
inline std::vector<Point3> read_pointcloud(std::istream& in) {
  std::vector<Point3> points;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream ss(line);
    Point3 p;
    if (!(ss >> p.x >> p.y >> p.z))
      throw FormatError("point cloud line " + std::to_string(lineno) + ": expected 'x y z'");
    points.push_back(p);
  }
  return points;
}

inline std::vector<Point3> read_pointcloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open point cloud file: " + path);
  return read_pointcloud(in);
}

}  // namespace trajgrid
