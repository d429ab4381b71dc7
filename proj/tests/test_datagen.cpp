#include "trajgrid/datagen.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace trajgrid {
namespace {

GridConfig cfg32() {
  GridConfig cfg = GridConfig::sized(32, 32, 0.2);
  cfg.range = 4.0;
  return cfg;
}

// 4-connected components; corridor arms touch only through the junction box.
int count_free_components(const Mask& free) {
  Mask seen(free.rows(), free.cols(), 0);
  int components = 0;
  const int dr[] = {-1, 1, 0, 0};
  const int dc[] = {0, 0, -1, 1};
  for (int r = 0; r < free.rows(); ++r)
    for (int c = 0; c < free.cols(); ++c) {
      if (!free.at(r, c) || seen.at(r, c)) continue;
      ++components;
      std::vector<CellIdx> stack{{r, c}};
      seen.at(r, c) = 1;
      while (!stack.empty()) {
        const CellIdx cur = stack.back();
        stack.pop_back();
        for (int k = 0; k < 4; ++k) {
          const int nr = cur.row + dr[k], nc = cur.col + dc[k];
          if (!seen.in_bounds(nr, nc) || !free.at(nr, nc) || seen.at(nr, nc)) continue;
          seen.at(nr, nc) = 1;
          stack.push_back({nr, nc});
        }
      }
    }
  return components;
}

TEST(GenerateScene, DeterministicPerSeed) {
  for (SceneKind kind : {SceneKind::TJunction, SceneKind::RandomObstacles, SceneKind::Bifurcation}) {
    const Scene a = generate_scene(kind, cfg32(), 42);
    const Scene b = generate_scene(kind, cfg32(), 42);
    EXPECT_EQ(a.grid.occupied, b.grid.occupied);
    EXPECT_EQ(a.grid.free, b.grid.free);
    EXPECT_EQ(a.history.raster, b.history.raster);
  }
}

TEST(GenerateScene, OpenSpaceHasNoOccupiedCellsInRange) {
  const Scene scene = generate_scene(SceneKind::OpenSpace, cfg32(), 7);
  for (size_t i = 0; i < scene.grid.occupied.size(); ++i) EXPECT_EQ(scene.grid.occupied[i], 0);
  EXPECT_TRUE(scene.grid.exclusive());
}

// Removing the junction box from a T-junction's free space leaves exactly the
// three corridor arms as separate components.
TEST(GenerateScene, TJunctionHasThreeArms) {
  SceneParams params;
  params.corridor_width = 8;
  const Scene scene = generate_scene(SceneKind::TJunction, cfg32(), 3, params);
  const OccupancyGrid& grid = scene.grid;
  const int w = grid.config.width;

  // Locate the bar band (rows whose free span covers most of the width) and
  // the entry columns (free cells below the bar).
  std::vector<int> bar_rows;
  for (int r = 0; r < grid.config.height; ++r) {
    int count = 0;
    for (int c = 0; c < w; ++c) count += grid.free.at(r, c);
    if (count >= w - 2) bar_rows.push_back(r);
  }
  ASSERT_FALSE(bar_rows.empty());
  const int below = bar_rows.back() + 1;
  std::set<int> entry_cols;
  for (int c = 0; c < w; ++c)
    if (grid.free.at(below, c)) entry_cols.insert(c);
  ASSERT_FALSE(entry_cols.empty());

  Mask arms = grid.free;
  for (int r : bar_rows)
    for (int c : entry_cols) arms.at(r, c) = 0;
  EXPECT_EQ(count_free_components(arms), 3);
}

TEST(GenerateScene, EgoFreeWithReachableFrontierAcrossKindsAndSeeds) {
  for (SceneKind kind : {SceneKind::StraightCorridor, SceneKind::TJunction,
                         SceneKind::CrossIntersection, SceneKind::Bifurcation,
                         SceneKind::RandomObstacles, SceneKind::OpenSpace}) {
    for (uint64_t seed = 0; seed < 25; ++seed) {
      const Scene scene = generate_scene(kind, cfg32(), seed);
      EXPECT_TRUE(scene.grid.exclusive()) << scene_kind_name(kind) << " seed " << seed;
      EXPECT_EQ(scene.grid.free.at(cfg32().ego_cell.row, cfg32().ego_cell.col), 1)
          << scene_kind_name(kind) << " seed " << seed;
      EXPECT_FALSE(sample_goals(scene.grid, cfg32().ego_cell).empty())
          << scene_kind_name(kind) << " seed " << seed;
    }
  }
}

TEST(SampleGoals, StraightCorridorHasOneGoalAtFarEnd) {
  const Scene scene = generate_scene(SceneKind::StraightCorridor, cfg32(), 5);
  const auto goals = sample_goals(scene.grid, cfg32().ego_cell);
  ASSERT_EQ(goals.size(), 1u);
  EXPECT_LE(goals[0].row, 2);  // far end of the corridor, top boundary
}

TEST(SampleGoals, CrossIntersectionHasThreeGoals) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const Scene scene = generate_scene(SceneKind::CrossIntersection, cfg32(), seed);
    const auto goals = sample_goals(scene.grid, cfg32().ego_cell);
    EXPECT_EQ(goals.size(), 3u) << "seed " << seed;
  }
}

TEST(SampleGoals, OpenSpaceGivesFourSeparatedGoals) {
  const Scene scene = generate_scene(SceneKind::OpenSpace, cfg32(), 9);
  const auto goals = sample_goals(scene.grid, cfg32().ego_cell, 4);
  ASSERT_EQ(goals.size(), 4u);
  for (size_t i = 0; i < goals.size(); ++i)
    for (size_t j = i + 1; j < goals.size(); ++j) {
      const double bi = bearing_deg(cfg32().ego_cell, goals[i]);
      const double bj = bearing_deg(cfg32().ego_cell, goals[j]);
      EXPECT_GE(bearing_diff_deg(bi, bj), 30.0);
    }
}

TEST(SampleGoals, NoFrontierGivesEmptyList) {
  GridConfig cfg = cfg32();
  OccupancyGrid grid = OccupancyGrid::all_unknown(cfg);
  // A sealed free room around the ego: no unknown adjacency, no boundary.
  for (int r = 20; r <= 30; ++r)
    for (int c = 10; c <= 20; ++c) grid.set_free(r, c);
  for (int r = 19; r <= 31; ++r)
    for (int c = 9; c <= 21; ++c)
      if (grid.unknown.in_bounds(r, c) && grid.unknown.at(r, c)) grid.set_occupied(r, c);
  const auto goals = sample_goals(grid, cfg.ego_cell);
  EXPECT_TRUE(goals.empty());
}

TEST(RasterizePath, ZeroThicknessAxisAlignedSegment) {
  OccupancyGrid grid = OccupancyGrid::all_unknown(cfg32());
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) grid.set_free(r, c);
  // Segment spanning five cells along the forward axis.
  const std::vector<Vec2> path{{0.0, 0.0}, {4 * 0.2, 0.0}};
  const TrajectoryLabel label = rasterize_path(path, grid, 0);
  int count = 0;
  for (size_t i = 0; i < label.traversable.size(); ++i) count += label.traversable[i];
  EXPECT_EQ(count, 5);
}

TEST(RasterizePath, ThicknessOneSetsFreeEightNeighborhood) {
  OccupancyGrid grid = OccupancyGrid::all_unknown(cfg32());
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) grid.set_free(r, c);
  const std::vector<Vec2> path{{0.0, 0.0}, {0.4, 0.0}};
  const TrajectoryLabel thin = rasterize_path(path, grid, 0);
  const TrajectoryLabel thick = rasterize_path(path, grid, 1);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) {
      if (!thin.traversable.at(r, c)) continue;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
          if (thick.traversable.in_bounds(r + dr, c + dc))
            EXPECT_EQ(thick.traversable.at(r + dr, c + dc), 1);
    }
}

TEST(RasterizePath, LabelsNeverTouchOccupiedCells) {
  const GridConfig cfg = cfg32();
  PlannerConfig pcfg = default_planner_config(cfg);
  pcfg.termination = TerminationMode::BestWithinBudget;
  pcfg.max_iterations = 800;

  int labels_checked = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const Scene scene = generate_scene(SceneKind::RandomObstacles, cfg, seed);
    const auto goals = sample_goals(scene.grid, cfg.ego_cell, 2);
    for (size_t gi = 0; gi < goals.size(); ++gi) {
      PlannerConfig pc = pcfg;
      pc.seed = seed * 10 + gi;
      const PlanResult plan =
          rrt_star(scene.grid, {0.0, 0.0}, cfg.to_meters(goals[gi].row, goals[gi].col), pc);
      if (!plan.success()) continue;
      const TrajectoryLabel label = rasterize_path(plan.path, scene.grid, 1);
      ++labels_checked;
      for (int r = 0; r < cfg.height; ++r)
        for (int c = 0; c < cfg.width; ++c)
          if (label.traversable.at(r, c)) {
            EXPECT_EQ(scene.grid.occupied.at(r, c), 0);
            EXPECT_EQ(scene.grid.free.at(r, c), 1);
          }
    }
  }
  EXPECT_GT(labels_checked, 50);
}

TEST(BuildDataset, OpenSceneSuiteKeepsEveryScene) {
  PlannerConfig pcfg = default_planner_config(cfg32());
  pcfg.max_iterations = 1200;
  auto [samples, summary] = build_dataset_samples(10, {SceneKind::OpenSpace}, cfg32(), pcfg, 99);
  EXPECT_EQ(summary.scenes_requested, 10);
  EXPECT_EQ(summary.scenes_kept, 10);
  EXPECT_EQ(static_cast<int>(samples.size()), 10);
  int labels = 0;
  for (const auto& s : samples) {
    EXPECT_GE(s.labels.size(), 1u);
    labels += static_cast<int>(s.labels.size());
  }
  EXPECT_EQ(summary.labels_total, labels);
}

TEST(BuildDataset, DeterministicFileBytes) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto p1 = dir / "trajgrid_ds_a.tpds";
  const auto p2 = dir / "trajgrid_ds_b.tpds";
  PlannerConfig pcfg = default_planner_config(cfg32());
  pcfg.max_iterations = 600;
  build_dataset(6, {SceneKind::TJunction, SceneKind::OpenSpace}, cfg32(), pcfg, p1.string(), 7);
  build_dataset(6, {SceneKind::TJunction, SceneKind::OpenSpace}, cfg32(), pcfg, p2.string(), 7);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  EXPECT_FALSE(c1.empty());
  EXPECT_EQ(c1, c2);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST(DatasetIo, RoundTripPreservesEveryField) {
  PlannerConfig pcfg = default_planner_config(cfg32());
  pcfg.max_iterations = 800;
  auto [samples, summary] =
      build_dataset_samples(4, {SceneKind::TJunction, SceneKind::Bifurcation}, cfg32(), pcfg, 11);
  ASSERT_FALSE(samples.empty());

  std::stringstream buf;
  write_dataset(buf, samples);
  const auto back = read_dataset(buf);
  ASSERT_EQ(back.size(), samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(back[i].grid.occupied, samples[i].grid.occupied);
    EXPECT_EQ(back[i].grid.free, samples[i].grid.free);
    EXPECT_EQ(back[i].grid.unknown, samples[i].grid.unknown);
    EXPECT_EQ(back[i].history, samples[i].history);
    ASSERT_EQ(back[i].labels.size(), samples[i].labels.size());
    for (size_t li = 0; li < samples[i].labels.size(); ++li) {
      EXPECT_EQ(back[i].labels[li].traversable, samples[i].labels[li].traversable);
      EXPECT_EQ(back[i].labels[li].polyline, samples[i].labels[li].polyline);
    }
  }
}

TEST(DatasetIo, BadMagicRejected) {
  std::stringstream buf;
  buf << "XXXXsome bytes";
  EXPECT_THROW(read_dataset(buf), FormatError);
}

TEST(DatasetIo, TruncationRejectedWithSampleIndex) {
  PlannerConfig pcfg = default_planner_config(cfg32());
  pcfg.max_iterations = 600;
  auto [samples, summary] = build_dataset_samples(2, {SceneKind::OpenSpace}, cfg32(), pcfg, 5);
  ASSERT_EQ(samples.size(), 2u);

  std::stringstream buf;
  write_dataset(buf, samples);
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 7);
  std::stringstream cut(bytes);
  try {
    read_dataset(cut);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 1"), std::string::npos);
  }
}

}  // namespace
}  // namespace trajgrid
