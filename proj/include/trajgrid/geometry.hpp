#pragma once

#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "trajgrid/common.hpp"

namespace trajgrid {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }

// Visits every cell touched by the segment between two points given in
// continuous cell coordinates (cell (i,j) spans [i-0.5,i+0.5] x [j-0.5,j+0.5],
// centers on integers). Exact corner crossings visit both side cells, so
// diagonal corner cuts cannot slip through. The visitor returns false to stop.
template <typename Visitor>
void visit_supercover(double r0, double c0, double r1, double c1, Visitor&& visit) {
  constexpr double kCornerEps = 1e-12;
  const double inf = std::numeric_limits<double>::infinity();

  // Shift so cell i spans [i, i+1).
  const double u0 = r0 + 0.5, v0 = c0 + 0.5;
  const double u1 = r1 + 0.5, v1 = c1 + 0.5;
  const double du = u1 - u0, dv = v1 - v0;

  int r = static_cast<int>(std::floor(u0));
  int c = static_cast<int>(std::floor(v0));
  const int r_end = static_cast<int>(std::floor(u1));
  const int c_end = static_cast<int>(std::floor(v1));

  const int step_r = du > 0 ? 1 : -1;
  const int step_c = dv > 0 ? 1 : -1;

  // Parameter t in [0,1] along the segment at the next row/col boundary.
  double t_max_r = inf, t_delta_r = inf;
  if (du != 0.0) {
    const double next = step_r > 0 ? (r + 1 - u0) : (u0 - r);
    t_max_r = next / std::abs(du);
    t_delta_r = 1.0 / std::abs(du);
  }
  double t_max_c = inf, t_delta_c = inf;
  if (dv != 0.0) {
    const double next = step_c > 0 ? (c + 1 - v0) : (v0 - c);
    t_max_c = next / std::abs(dv);
    t_delta_c = 1.0 / std::abs(dv);
  }

  if (!visit(r, c)) return;

  int guard = 2 * (std::abs(r_end - r) + std::abs(c_end - c)) + 8;
  while ((r != r_end || c != c_end) && guard-- > 0) {
    if (t_max_r > 1.0 + kCornerEps && t_max_c > 1.0 + kCornerEps) break;
    if (std::abs(t_max_r - t_max_c) <= kCornerEps) {
      // Corner crossing: the segment touches both side cells.
      if (!visit(r + step_r, c)) return;
      if (!visit(r, c + step_c)) return;
      r += step_r;
      c += step_c;
      t_max_r += t_delta_r;
      t_max_c += t_delta_c;
    } else if (t_max_r < t_max_c) {
      r += step_r;
      t_max_r += t_delta_r;
    } else {
      c += step_c;
      t_max_c += t_delta_c;
    }
    if (!visit(r, c)) return;
  }
  if (r != r_end || c != c_end) visit(r_end, c_end);
}

// Materialized supercover, de-duplicated, in traversal order.
inline std::vector<CellIdx> supercover(double r0, double c0, double r1, double c1) {
  std::vector<CellIdx> cells;
  visit_supercover(r0, c0, r1, c1, [&](int r, int c) {
    // The walk is monotone, so duplicates can only appear within a short window.
    size_t n = cells.size();
    for (size_t i = n > 4 ? n - 4 : 0; i < n; ++i)
      if (cells[i].row == r && cells[i].col == c) return true;
    cells.push_back({r, c});
    return true;
  });
  return cells;
}

inline std::vector<CellIdx> supercover(CellIdx a, CellIdx b) {
  return supercover(a.row, a.col, b.row, b.col);
}

inline double euclidean(CellIdx a, CellIdx b) {
  return std::hypot(static_cast<double>(a.row - b.row), static_cast<double>(a.col - b.col));
}

// Bearing of `to` as seen from `from`, degrees in (-180, 180].
// 0 deg points up-grid (decreasing row), positive clockwise (increasing col).
inline double bearing_deg(CellIdx from, CellIdx to) {
  const double dr = static_cast<double>(to.row - from.row);
  const double dc = static_cast<double>(to.col - from.col);
  return std::atan2(dc, -dr) * 180.0 / M_PI;
}

// Absolute angular difference in [0, 180].
inline double bearing_diff_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

}  // namespace trajgrid
