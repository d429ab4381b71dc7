#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "trajgrid/common.hpp"
#include "trajgrid/geometry.hpp"
#include "trajgrid/grid.hpp"
#include "trajgrid/planners.hpp"

namespace trajgrid {

enum class SceneKind {
  StraightCorridor,
  TJunction,
  CrossIntersection,
  Bifurcation,
  RandomObstacles,
  OpenSpace,
};

inline const char* scene_kind_name(SceneKind k) {
  switch (k) {
    case SceneKind::StraightCorridor: return "corridor";
    case SceneKind::TJunction: return "tjunction";
    case SceneKind::CrossIntersection: return "cross";
    case SceneKind::Bifurcation: return "bifurcation";
    case SceneKind::RandomObstacles: return "random";
    case SceneKind::OpenSpace: return "open";
  }
  return "unknown";
}

inline SceneKind scene_kind_from_name(const std::string& name) {
  for (SceneKind k : {SceneKind::StraightCorridor, SceneKind::TJunction,
                      SceneKind::CrossIntersection, SceneKind::Bifurcation,
                      SceneKind::RandomObstacles, SceneKind::OpenSpace})
    if (name == scene_kind_name(k)) return k;
  throw ConfigError("unknown scene kind: " + name);
}

struct SceneParams {
  int corridor_width = 0;  // 0 = auto (about one sixth of the grid height)
  double obstacle_density = 0.06;
};

struct Scene {
  OccupancyGrid grid;
  TrackHistory history;
  SceneKind kind = SceneKind::OpenSpace;
  uint64_t seed = 0;
};

// Traversable-region target: the rasterized footprint of one trajectory.
struct TrajectoryLabel {
  Mask traversable;                                   // P0
  std::vector<std::pair<float, float>> polyline;      // (row,col) in cell units

  Mask complement() const {
    Mask m(traversable.rows(), traversable.cols(), 0);
    for (size_t i = 0; i < m.size(); ++i) m[i] = traversable[i] ? 0 : 1;
    return m;
  }
};

struct DatasetSample {
  OccupancyGrid grid;
  Mask history;  // the Q channel
  std::vector<TrajectoryLabel> labels;
  SceneKind kind = SceneKind::OpenSpace;  // in-memory metadata, not serialized
  uint64_t seed = 0;

  NetworkInput input() const {
    TrackHistory h;
    h.raster = history;
    h.poses.push_back({0.0, 0.0, 0.0});
    return assemble_input(grid, h);
  }
};

namespace detail {

struct SceneBuilder {
  OccupancyGrid grid;
  int h, w;
  CellIdx ego;

  explicit SceneBuilder(const GridConfig& cfg)
      : grid(OccupancyGrid::all_unknown(cfg)), h(cfg.height), w(cfg.width), ego(cfg.ego_cell) {}

  void carve(int r0, int r1, int c0, int c1) {
    for (int r = std::max(0, r0); r <= std::min(h - 1, r1); ++r)
      for (int c = std::max(0, c0); c <= std::min(w - 1, c1); ++c) grid.set_free(r, c);
  }

  void carve_band(CellIdx a, CellIdx b, int half_width) {
    for (const CellIdx& cell : supercover(a, b))
      carve(cell.row - half_width, cell.row + half_width, cell.col - half_width,
            cell.col + half_width);
  }

  // Walls every unknown cell that touches free space, so the only frontier
  // cells left are the corridor arm ends on the grid boundary.
  void wall_unknown_borders() {
    std::vector<CellIdx> walls;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        if (!grid.unknown.at(r, c)) continue;
        bool near_free = false;
        for (int dr = -1; dr <= 1 && !near_free; ++dr)
          for (int dc = -1; dc <= 1 && !near_free; ++dc)
            near_free = grid.free.in_bounds(r + dr, c + dc) && grid.free.at(r + dr, c + dc);
        if (near_free) walls.push_back({r, c});
      }
    for (const CellIdx& cell : walls) grid.set_occupied(cell.row, cell.col);
  }

  void carve_disk(CellIdx center, double radius) {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (euclidean({r, c}, center) <= radius) grid.set_free(r, c);
  }
};

inline TrackHistory entry_history(const GridConfig& cfg, int max_back_cells) {
  std::vector<Pose> poses;
  for (int i = max_back_cells; i >= 0; --i)
    poses.push_back({-static_cast<double>(i) * cfg.resolution, 0.0, 0.0});
  return rasterize_history(poses, cfg);
}

inline bool ego_has_reachable_frontier(const OccupancyGrid& grid);

}  // namespace detail

// Deterministic synthetic scenes. The entry corridor behind the ego is closed
// off by walls so that only the dominant motion choices carry frontier cells.
inline Scene generate_scene(SceneKind kind, const GridConfig& cfg, uint64_t seed,
                            SceneParams params = {}) {
  cfg.validate();
  Rng rng(mix_seed(seed, static_cast<uint64_t>(kind)));
  const int h = cfg.height, w = cfg.width;
  const int cw = params.corridor_width > 0 ? params.corridor_width : std::max(4, h / 6);
  const int half = cw / 2;
  const CellIdx ego = cfg.ego_cell;

  detail::SceneBuilder sb(cfg);
  const int entry_bottom = h - 2;  // row h-1 stays unknown and gets walled

  switch (kind) {
    case SceneKind::StraightCorridor: {
      sb.carve(0, entry_bottom, ego.col - half, ego.col + half);
      sb.wall_unknown_borders();
      break;
    }
    case SceneKind::TJunction: {
      const int bar_top = 3 + rng.uniform_int(std::max(1, h / 4));
      sb.carve(bar_top, bar_top + cw - 1, 0, w - 1);                        // bar to both edges
      sb.carve(bar_top, entry_bottom, ego.col - half, ego.col + half);      // entry stem
      sb.wall_unknown_borders();
      break;
    }
    case SceneKind::CrossIntersection: {
      const int bar_top = 3 + rng.uniform_int(std::max(1, h / 4));
      sb.carve(bar_top, bar_top + cw - 1, 0, w - 1);
      sb.carve(0, entry_bottom, ego.col - half, ego.col + half);  // stem + top arm
      sb.wall_unknown_borders();
      break;
    }
    case SceneKind::Bifurcation: {
      const int split = h / 2 + rng.uniform_int(std::max(1, h / 8));
      sb.carve(split - half, entry_bottom, ego.col - half, ego.col + half);
      const int spread = w / 3 + rng.uniform_int(std::max(1, w / 6));
      sb.carve_band({split, ego.col}, {0, std::max(0, ego.col - spread)}, half);
      sb.carve_band({split, ego.col}, {0, std::min(w - 1, ego.col + spread)}, half);
      sb.wall_unknown_borders();
      break;
    }
    case SceneKind::OpenSpace: {
      sb.carve_disk(ego, cfg.range / cfg.resolution);
      break;
    }
    case SceneKind::RandomObstacles: {
      // Retries with halved density until the ego can still reach a frontier.
      double density = params.obstacle_density;
      for (int attempt = 0; attempt < 4; ++attempt) {
        detail::SceneBuilder trial(cfg);
        trial.carve_disk(ego, cfg.range / cfg.resolution);
        Rng block_rng(mix_seed(seed, 0xb10c + attempt));
        const int target = static_cast<int>(density * h * w / 9.0);
        for (int i = 0; i < target; ++i) {
          const int rr = block_rng.uniform_int(h), cc = block_rng.uniform_int(w);
          const int sr = 1 + block_rng.uniform_int(3), sc = 1 + block_rng.uniform_int(3);
          if (std::abs(rr - ego.row) < 4 && std::abs(cc - ego.col) < 4) continue;
          for (int r = rr; r < std::min(h, rr + sr); ++r)
            for (int c = cc; c < std::min(w, cc + sc); ++c)
              if (trial.grid.free.at(r, c)) trial.grid.set_occupied(r, c);
        }
        sb.grid = trial.grid;
        if (detail::ego_has_reachable_frontier(sb.grid) || attempt == 3) break;
        density *= 0.5;
      }
      break;
    }
  }

  Scene scene;
  scene.grid = std::move(sb.grid);
  scene.kind = kind;
  scene.seed = seed;
  // History runs along the entry corridor, clipped above the closing wall.
  scene.history = detail::entry_history(cfg, std::min(9, h - 2 - ego.row));
  if (!scene.grid.free.at(ego.row, ego.col)) scene.grid.set_free(ego.row, ego.col);
  return scene;
}

namespace detail {

inline Mask reachable_free(const OccupancyGrid& grid, CellIdx from) {
  Mask seen(grid.config.height, grid.config.width, 0);
  if (!grid.free.in_bounds(from) || !grid.free.at(from.row, from.col)) return seen;
  std::vector<CellIdx> stack{from};
  seen.at(from.row, from.col) = 1;
  while (!stack.empty()) {
    const CellIdx cur = stack.back();
    stack.pop_back();
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int r = cur.row + dr, c = cur.col + dc;
        if ((dr == 0 && dc == 0) || !seen.in_bounds(r, c) || seen.at(r, c)) continue;
        if (!grid.free.at(r, c)) continue;
        seen.at(r, c) = 1;
        stack.push_back({r, c});
      }
  }
  return seen;
}

inline bool is_frontier(const OccupancyGrid& grid, int r, int c) {
  if (!grid.free.at(r, c)) return false;
  if (r == 0 || c == 0 || r == grid.config.height - 1 || c == grid.config.width - 1) return true;
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc)
      if (grid.unknown.at(r + dr, c + dc)) return true;
  return false;
}

inline bool ego_has_reachable_frontier(const OccupancyGrid& grid) {
  const Mask reach = reachable_free(grid, grid.config.ego_cell);
  for (int r = 0; r < grid.config.height; ++r)
    for (int c = 0; c < grid.config.width; ++c)
      if (reach.at(r, c) && is_frontier(grid, r, c)) return true;
  return false;
}

}  // namespace detail

// Farthest reachable frontier cell per 30-degree bearing cluster, capped at
// max_goals. Frontier cells sit next to unknown space or on the boundary.
inline std::vector<CellIdx> sample_goals(const OccupancyGrid& grid, CellIdx ego,
                                         int max_goals = 4) {
  constexpr double kClusterDeg = 30.0;
  const Mask reach = detail::reachable_free(grid, ego);

  struct Candidate {
    CellIdx cell;
    double distance;
    double bearing;
  };
  std::vector<Candidate> frontier;
  for (int r = 0; r < grid.config.height; ++r)
    for (int c = 0; c < grid.config.width; ++c) {
      if (!reach.at(r, c) || !detail::is_frontier(grid, r, c)) continue;
      if (r == ego.row && c == ego.col) continue;
      frontier.push_back({{r, c}, euclidean({r, c}, ego), bearing_deg(ego, {r, c})});
    }

  std::sort(frontier.begin(), frontier.end(), [](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance > b.distance;
    if (a.cell.row != b.cell.row) return a.cell.row < b.cell.row;
    return a.cell.col < b.cell.col;
  });

  std::vector<CellIdx> goals;
  std::vector<double> bearings;
  for (const Candidate& cand : frontier) {
    if (static_cast<int>(goals.size()) >= max_goals) break;
    bool clustered = false;
    for (double b : bearings)
      if (bearing_diff_deg(cand.bearing, b) < kClusterDeg) {
        clustered = true;
        break;
      }
    if (clustered) continue;
    goals.push_back(cand.cell);
    bearings.push_back(cand.bearing);
  }
  return goals;
}

// Supercover footprint of the polyline, dilated by a Chebyshev disk of the
// given radius and clipped to free space.
inline TrajectoryLabel rasterize_path(const std::vector<Vec2>& path, const OccupancyGrid& grid,
                                      int thickness) {
  const GridConfig& cfg = grid.config;
  TrajectoryLabel label;
  label.traversable = Mask(cfg.height, cfg.width, 0);

  Mask touched(cfg.height, cfg.width, 0);
  auto mark = [&](int r, int c) {
    if (touched.in_bounds(r, c)) touched.at(r, c) = 1;
    return true;
  };
  if (path.size() == 1) {
    CellIdx cell = cfg.to_cell(path[0].x, path[0].y);
    mark(cell.row, cell.col);
  }
  for (size_t i = 0; i + 1 < path.size(); ++i)
    visit_supercover(cfg.to_cell_row(path[i].x), cfg.to_cell_col(path[i].y),
                     cfg.to_cell_row(path[i + 1].x), cfg.to_cell_col(path[i + 1].y), mark);

  for (int r = 0; r < cfg.height; ++r)
    for (int c = 0; c < cfg.width; ++c) {
      if (!touched.at(r, c)) continue;
      for (int dr = -thickness; dr <= thickness; ++dr)
        for (int dc = -thickness; dc <= thickness; ++dc)
          if (grid.free.in_bounds(r + dr, c + dc) && grid.free.at(r + dr, c + dc))
            label.traversable.at(r + dr, c + dc) = 1;
    }

  bool any = false;
  for (size_t i = 0; i < label.traversable.size(); ++i) any = any || label.traversable[i];
  if (!any) throw LabelError("rasterize_path: label has no free cells");

  label.polyline.reserve(path.size());
  for (const Vec2& p : path)
    label.polyline.emplace_back(static_cast<float>(cfg.to_cell_row(p.x)),
                                static_cast<float>(cfg.to_cell_col(p.y)));
  return label;
}

struct DatasetSummary {
  int scenes_requested = 0;
  int scenes_kept = 0;
  int labels_total = 0;
  std::map<std::string, int> drop_reasons;
};

namespace detail {

inline void pack_mask(const Mask& m, std::vector<uint8_t>& out) {
  const size_t bytes = (m.size() + 7) / 8;
  const size_t base = out.size();
  out.resize(base + bytes, 0);
  for (size_t i = 0; i < m.size(); ++i)
    if (m[i]) out[base + (i >> 3)] |= static_cast<uint8_t>(1u << (i & 7));
}

inline Mask unpack_mask(const uint8_t* data, int rows, int cols) {
  Mask m(rows, cols, 0);
  for (size_t i = 0; i < m.size(); ++i) m[i] = (data[i >> 3] >> (i & 7)) & 1u;
  return m;
}

}  // namespace detail

// TPDS container (little-endian): magic "TPDS", version u16, sample_count
// u32; per sample: h u16, w u16, bit-packed masks (occupied, free, unknown,
// history), label_count u8; per label: point_count u16, (f32 row, f32 col)
// pairs in cell units, bit-packed traversable mask. Bits are row-major,
// LSB-first within each byte.
constexpr uint16_t kDatasetVersion = 1;

inline void write_dataset(std::ostream& out, const std::vector<DatasetSample>& samples) {
  out.write("TPDS", 4);
  const uint16_t version = kDatasetVersion;
  out.write(reinterpret_cast<const char*>(&version), 2);
  const uint32_t count = static_cast<uint32_t>(samples.size());
  out.write(reinterpret_cast<const char*>(&count), 4);

  for (const DatasetSample& s : samples) {
    const uint16_t h = static_cast<uint16_t>(s.grid.config.height);
    const uint16_t w = static_cast<uint16_t>(s.grid.config.width);
    out.write(reinterpret_cast<const char*>(&h), 2);
    out.write(reinterpret_cast<const char*>(&w), 2);
    std::vector<uint8_t> packed;
    detail::pack_mask(s.grid.occupied, packed);
    detail::pack_mask(s.grid.free, packed);
    detail::pack_mask(s.grid.unknown, packed);
    detail::pack_mask(s.history, packed);
    out.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (s.labels.size() > 0xff) throw FormatError("write_dataset: too many labels");
    const uint8_t label_count = static_cast<uint8_t>(s.labels.size());
    out.write(reinterpret_cast<const char*>(&label_count), 1);
    for (const TrajectoryLabel& label : s.labels) {
      if (label.polyline.size() > 0xffff) throw FormatError("write_dataset: polyline too long");
      const uint16_t n = static_cast<uint16_t>(label.polyline.size());
      out.write(reinterpret_cast<const char*>(&n), 2);
      for (const auto& [r, c] : label.polyline) {
        out.write(reinterpret_cast<const char*>(&r), 4);
        out.write(reinterpret_cast<const char*>(&c), 4);
      }
      std::vector<uint8_t> lp;
      detail::pack_mask(label.traversable, lp);
      out.write(reinterpret_cast<const char*>(lp.data()), static_cast<std::streamsize>(lp.size()));
    }
  }
}

inline void write_dataset(const std::string& path, const std::vector<DatasetSample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset: " + path);
  write_dataset(out, samples);
  if (!out) throw IoError("dataset write failed: " + path);
}

inline std::vector<DatasetSample> read_dataset(std::istream& in, double resolution = 0.2) {
  auto fail = [](const std::string& msg) -> void { throw FormatError("read_dataset: " + msg); };

  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "TPDS", 4) != 0) fail("bad magic");
  uint16_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 2);
  if (!in || version != kDatasetVersion) fail("unsupported version");
  uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  if (!in) fail("truncated header");

  std::vector<DatasetSample> samples;
  samples.reserve(count);
  for (uint32_t si = 0; si < count; ++si) {
    const std::string at = "sample " + std::to_string(si);
    uint16_t h = 0, w = 0;
    in.read(reinterpret_cast<char*>(&h), 2);
    in.read(reinterpret_cast<char*>(&w), 2);
    if (!in || h < 8 || w < 8) fail(at + ": bad dimensions");

    const size_t mask_bytes = (static_cast<size_t>(h) * w + 7) / 8;
    std::vector<uint8_t> buf(mask_bytes * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) fail(at + ": truncated masks");

    DatasetSample s;
    s.grid.config = GridConfig::sized(h, w, resolution);
    s.grid.occupied = detail::unpack_mask(buf.data(), h, w);
    s.grid.free = detail::unpack_mask(buf.data() + mask_bytes, h, w);
    s.grid.unknown = detail::unpack_mask(buf.data() + 2 * mask_bytes, h, w);
    s.history = detail::unpack_mask(buf.data() + 3 * mask_bytes, h, w);
    if (!s.grid.exclusive()) fail(at + ": masks are not mutually exclusive");

    uint8_t label_count = 0;
    in.read(reinterpret_cast<char*>(&label_count), 1);
    if (!in) fail(at + ": truncated label count");
    for (int li = 0; li < label_count; ++li) {
      TrajectoryLabel label;
      uint16_t n = 0;
      in.read(reinterpret_cast<char*>(&n), 2);
      if (!in) fail(at + ": truncated polyline");
      label.polyline.resize(n);
      for (auto& [r, c] : label.polyline) {
        in.read(reinterpret_cast<char*>(&r), 4);
        in.read(reinterpret_cast<char*>(&c), 4);
      }
      std::vector<uint8_t> lp(mask_bytes);
      in.read(reinterpret_cast<char*>(lp.data()), static_cast<std::streamsize>(lp.size()));
      if (!in) fail(at + ": truncated label mask");
      label.traversable = detail::unpack_mask(lp.data(), h, w);
      bool any = false;
      for (size_t i = 0; i < label.traversable.size(); ++i) {
        if (label.traversable[i] && !s.grid.free[i]) fail(at + ": label escapes free space");
        any = any || label.traversable[i];
      }
      if (!any) fail(at + ": empty label");
      s.labels.push_back(std::move(label));
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

inline std::vector<DatasetSample> read_dataset(const std::string& path, double resolution = 0.2) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path);
  return read_dataset(in, resolution);
}

// Generates scenes, samples dominant goals, plans to each goal, and keeps the
// rasterized successes. Scenes without a single successful plan are dropped.
inline std::pair<std::vector<DatasetSample>, DatasetSummary> build_dataset_samples(
    int n_scenes, const std::vector<SceneKind>& kinds, const GridConfig& cfg,
    const PlannerConfig& planner_cfg, uint64_t seed, SceneParams params = {}, int max_goals = 4,
    int label_thickness = 1) {
  if (n_scenes < 1 || kinds.empty()) throw DataError("build_dataset: nothing to generate");

  std::vector<DatasetSample> samples;
  DatasetSummary summary;
  summary.scenes_requested = n_scenes;

  for (int i = 0; i < n_scenes; ++i) {
    const SceneKind kind = kinds[i % kinds.size()];
    const uint64_t scene_seed = mix_seed(seed, static_cast<uint64_t>(i));
    Scene scene = generate_scene(kind, cfg, scene_seed, params);

    const std::vector<CellIdx> goals = sample_goals(scene.grid, cfg.ego_cell, max_goals);
    if (goals.empty()) {
      ++summary.drop_reasons["no_reachable_frontier"];
      continue;
    }

    DatasetSample sample;
    sample.grid = scene.grid;
    sample.history = scene.history.raster;
    sample.kind = kind;
    sample.seed = scene_seed;

    for (size_t gi = 0; gi < goals.size(); ++gi) {
      PlannerConfig pc = planner_cfg;
      pc.seed = mix_seed(scene_seed, 1000 + gi);
      pc.termination = TerminationMode::BestWithinBudget;
      pc.time_budget = 0.0;  // iteration-capped for bit-reproducibility
      const Vec2 goal = scene.grid.config.to_meters(goals[gi].row, goals[gi].col);
      PlanResult plan = rrt_star(scene.grid, {0.0, 0.0}, goal, pc);
      if (!plan.success()) {
        ++summary.drop_reasons["plan_failure"];
        continue;
      }
      try {
        sample.labels.push_back(rasterize_path(plan.path, scene.grid, label_thickness));
      } catch (const LabelError&) {
        ++summary.drop_reasons["empty_label"];
      }
    }

    if (sample.labels.empty()) {
      ++summary.drop_reasons["scene_without_labels"];
      continue;
    }
    summary.labels_total += static_cast<int>(sample.labels.size());
    samples.push_back(std::move(sample));
  }
  summary.scenes_kept = static_cast<int>(samples.size());
  return {std::move(samples), summary};
}

inline DatasetSummary build_dataset(int n_scenes, const std::vector<SceneKind>& kinds,
                                    const GridConfig& cfg, const PlannerConfig& planner_cfg,
                                    const std::string& out_path, uint64_t seed,
                                    SceneParams params = {}) {
  auto [samples, summary] = build_dataset_samples(n_scenes, kinds, cfg, planner_cfg, seed, params);
  write_dataset(out_path, samples);
  return summary;
}

}  // namespace trajgrid
