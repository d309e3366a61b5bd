#pragma once

// Internal helper: convex hull (Andrew monotone chain) of planar point sets,
// used to build inscribed dual-domain polygons. Not installed.

#include "asphere/types.hpp"

#include <algorithm>
#include <vector>

namespace asphere::detail {

inline double cross2(const Vec& o, const Vec& a, const Vec& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

// Counterclockwise hull without duplicate endpoint. Collinear points dropped.
inline std::vector<Vec> convex_hull(std::vector<Vec> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec& a, const Vec& b) {
    return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec& a, const Vec& b) {
                          return a[0] == b[0] && a[1] == b[1];
                        }),
            pts.end());
  const int m = static_cast<int>(pts.size());
  if (m < 3) return pts;
  std::vector<Vec> hull(2 * m);
  int k = 0;
  for (int i = 0; i < m; ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const int lower = k + 1;
  for (int i = m - 2; i >= 0; --i) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Shrink a point set toward its centroid (inscribed safety margin).
inline std::vector<Vec> shrink_about_centroid(std::vector<Vec> pts, double factor) {
  Vec c = Vec::Zero(2);
  for (const Vec& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  for (Vec& p : pts) p = c + factor * (p - c);
  return pts;
}

}  // namespace asphere::detail
