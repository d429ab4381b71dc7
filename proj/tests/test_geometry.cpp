#include "trajgrid/geometry.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "trajgrid/autodiff.hpp"

namespace trajgrid {
namespace {

std::set<std::pair<int, int>> cell_set(const std::vector<CellIdx>& cells) {
  std::set<std::pair<int, int>> out;
  for (const CellIdx& c : cells) out.insert({c.row, c.col});
  return out;
}

TEST(Supercover, SinglePoint) {
  const auto cells = supercover(3.0, 4.0, 3.0, 4.0);
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(cells[0], (CellIdx{3, 4}));
}

TEST(Supercover, AxisAlignedSpanOfFiveCoversSixCells) {
  const auto cells = supercover(8.0, 2.0, 3.0, 2.0);
  EXPECT_EQ(cells.size(), 6u);
  for (int r = 3; r <= 8; ++r) EXPECT_TRUE(cell_set(cells).count({r, 2}));
}

TEST(Supercover, DiagonalCornerCrossingTouchesAllFourCells) {
  // Centers of (1,0) and (0,1); the segment passes exactly through the
  // shared corner, so a corner-cutting obstacle at (0,0) or (1,1) must show.
  const auto cells = cell_set(supercover(1.0, 0.0, 0.0, 1.0));
  EXPECT_TRUE(cells.count({1, 0}));
  EXPECT_TRUE(cells.count({0, 1}));
  EXPECT_TRUE(cells.count({0, 0}));
  EXPECT_TRUE(cells.count({1, 1}));
}

TEST(Supercover, LongDiagonalIncludesBothSideCellsAtEveryStep) {
  const auto cells = cell_set(supercover(0.0, 0.0, 4.0, 4.0));
  for (int i = 0; i < 4; ++i) {
    EXPECT_TRUE(cells.count({i, i}));
    EXPECT_TRUE(cells.count({i + 1, i}));
    EXPECT_TRUE(cells.count({i, i + 1}));
  }
  EXPECT_TRUE(cells.count({4, 4}));
}

TEST(Supercover, SymmetricUnderEndpointSwap) {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double r0 = rng.uniform(-8.0, 8.0), c0 = rng.uniform(-8.0, 8.0);
    const double r1 = rng.uniform(-8.0, 8.0), c1 = rng.uniform(-8.0, 8.0);
    EXPECT_EQ(cell_set(supercover(r0, c0, r1, c1)), cell_set(supercover(r1, c1, r0, c0)))
        << "segment (" << r0 << "," << c0 << ")-(" << r1 << "," << c1 << ")";
  }
}

// Independent oracle: any cell containing a densely-sampled point of the
// segment must appear in the supercover.
TEST(Supercover, ContainsEveryDenselySampledCell) {
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    const double r0 = rng.uniform(-6.0, 6.0), c0 = rng.uniform(-6.0, 6.0);
    const double r1 = rng.uniform(-6.0, 6.0), c1 = rng.uniform(-6.0, 6.0);
    const auto cells = cell_set(supercover(r0, c0, r1, c1));
    for (int s = 0; s <= 2000; ++s) {
      const double t = s / 2000.0;
      const double r = r0 + t * (r1 - r0), c = c0 + t * (c1 - c0);
      const int cr = static_cast<int>(std::floor(r + 0.5));
      const int cc = static_cast<int>(std::floor(c + 0.5));
      EXPECT_TRUE(cells.count({cr, cc}))
          << "missing (" << cr << "," << cc << ") at t=" << t;
    }
  }
}

TEST(Bearing, CardinalDirections) {
  const CellIdx ego{10, 10};
  EXPECT_DOUBLE_EQ(bearing_deg(ego, {0, 10}), 0.0);     // up-grid
  EXPECT_DOUBLE_EQ(bearing_deg(ego, {10, 20}), 90.0);   // right
  EXPECT_DOUBLE_EQ(bearing_deg(ego, {20, 10}), 180.0);  // behind
  EXPECT_DOUBLE_EQ(bearing_deg(ego, {10, 0}), -90.0);   // left
}

TEST(Bearing, DifferenceWrapsAround) {
  EXPECT_DOUBLE_EQ(bearing_diff_deg(170.0, -170.0), 20.0);
  EXPECT_DOUBLE_EQ(bearing_diff_deg(0.0, 90.0), 90.0);
  EXPECT_DOUBLE_EQ(bearing_diff_deg(-90.0, 90.0), 180.0);
}

}  // namespace
}  // namespace trajgrid
