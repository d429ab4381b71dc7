#pragma once

#include <cmath>
#include <vector>

#include "trajgrid/common.hpp"
#include "trajgrid/geometry.hpp"

namespace trajgrid {

namespace detail {

// De Boor evaluation of a clamped B-spline at u in [0,1].
inline Vec2 deboor(double u, int degree, const std::vector<double>& knots,
                   const std::vector<Vec2>& ctrl) {
  const int n = static_cast<int>(ctrl.size());
  if (u >= 1.0) return ctrl.back();
  if (u <= 0.0) return ctrl.front();

  int span = degree;
  while (span < n - 1 && !(u >= knots[span] && u < knots[span + 1])) ++span;

  std::vector<Vec2> d(degree + 1);
  for (int j = 0; j <= degree; ++j) d[j] = ctrl[span - degree + j];
  for (int r = 1; r <= degree; ++r) {
    for (int j = degree; j >= r; --j) {
      const int i = span - degree + j;
      const double den = knots[i + degree - r + 1] - knots[i];
      const double a = den > 0.0 ? (u - knots[i]) / den : 0.0;
      d[j] = (1.0 - a) * d[j - 1] + a * d[j];
    }
  }
  return d[degree];
}

// Resamples a dense polyline at `samples` points equally spaced by arc length.
inline std::vector<Vec2> resample_by_arclength(const std::vector<Vec2>& dense, int samples) {
  std::vector<double> cum(dense.size(), 0.0);
  for (size_t i = 1; i < dense.size(); ++i) cum[i] = cum[i - 1] + dist(dense[i - 1], dense[i]);
  const double total = cum.back();

  std::vector<Vec2> out;
  out.reserve(samples);
  out.push_back(dense.front());
  size_t seg = 0;
  for (int j = 1; j < samples - 1; ++j) {
    const double target = total * j / (samples - 1);
    while (seg + 1 < cum.size() && cum[seg + 1] < target) ++seg;
    const double span = cum[seg + 1] - cum[seg];
    const double t = span > 0.0 ? (target - cum[seg]) / span : 0.0;
    out.push_back(dense[seg] + t * (dense[seg + 1] - dense[seg]));
  }
  out.push_back(dense.back());
  return out;
}

}  // namespace detail

// Clamped cubic B-spline with the path vertices as control points (degree
// drops for short paths), resampled at `samples` points uniformly by arc
// length. The first and last output points equal the input endpoints.
inline std::vector<Vec2> bspline_smooth(const std::vector<Vec2>& path, int samples) {
  if (path.size() < 2) throw InputError("bspline_smooth: need at least 2 points");
  if (samples < 2) throw InputError("bspline_smooth: need at least 2 samples");

  const int n = static_cast<int>(path.size());
  const int degree = std::min(3, n - 1);

  // Clamped uniform knot vector.
  std::vector<double> knots(n + degree + 1, 0.0);
  for (int i = 0; i <= degree; ++i) knots[n + i] = 1.0;
  for (int i = degree + 1; i < n; ++i) knots[i] = static_cast<double>(i - degree) / (n - degree);

  const int dense_n = std::max(256, samples * 16);
  std::vector<Vec2> dense;
  dense.reserve(dense_n + 1);
  for (int i = 0; i <= dense_n; ++i)
    dense.push_back(detail::deboor(static_cast<double>(i) / dense_n, degree, knots, path));
  dense.front() = path.front();
  dense.back() = path.back();

  return detail::resample_by_arclength(dense, samples);
}

// Resamples a polyline itself (no smoothing) at equal arc-length spacing.
inline std::vector<Vec2> resample_polyline(const std::vector<Vec2>& path, int samples) {
  if (path.size() < 2) throw InputError("resample_polyline: need at least 2 points");
  if (samples < 2) throw InputError("resample_polyline: need at least 2 samples");
  return detail::resample_by_arclength(path, samples);
}

inline double path_length(const std::vector<Vec2>& polyline) {
  double len = 0.0;
  for (size_t i = 1; i < polyline.size(); ++i) len += dist(polyline[i - 1], polyline[i]);
  return len;
}

}  // namespace trajgrid
