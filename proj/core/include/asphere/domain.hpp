#pragma once

#include "asphere/projective.hpp"
#include "asphere/types.hpp"

#include <utility>
#include <vector>

namespace asphere {

// Bounded convex domain in the chart R^n (n = 1 or 2): the base of the cone
// over which potentials live. Interval in 1-D; disk, ellipse, or convex
// polygon in 2-D. All queries are exact for interval/disk/polygon; for the
// ellipse, membership margins use the conservative bound
// dist(t, boundary) >= b_min * (1 - elliptic_radius(t)).
class ConvexDomain {
 public:
  enum class Kind { Interval, Disk, Ellipse, Polygon };

  static ConvexDomain interval(double lo, double hi);
  static ConvexDomain disk(const Vec& center, double radius);
  // Semi-axes a along angle, b across; angle in radians.
  static ConvexDomain ellipse(const Vec& center, double semi_a, double semi_b, double angle);
  // Strictly convex vertex list, either orientation (stored counter-clockwise).
  static ConvexDomain polygon(std::vector<Vec> vertices);
  // interval(-1, 1) for n = 1, unit disk for n = 2.
  static ConvexDomain unit_ball(int dim);
  static ConvexDomain square(double half_width);

  int dim() const { return n_; }
  Kind kind() const { return kind_; }
  std::string kind_name() const;

  // Strict interior test; margin > 0 demands (at least) that clearance.
  bool contains(const Vec& t, double margin = 0.0) const;
  // Distance to the boundary from an interior point (ellipse: lower bound).
  double boundary_distance(const Vec& t) const;
  // Length of the segment from an interior point to the boundary along a
  // direction (dir need not be normalized; the result is in units of |dir|).
  double exit_distance(const Vec& from, const Vec& dir) const;

  std::pair<Vec, Vec> bounding_box() const;
  Vec centroid() const;
  double scale() const;  // diameter of the bounding box

  // Image under a projective map. Requires lambda > 0 on the closure
  // (otherwise the image leaves the chart); throws "chart overflow" if not.
  ConvexDomain transformed(const ProjectiveMap& map) const;

  std::vector<Vec> boundary_points(int count) const;

  // Shape parameters (valid for the matching kind only).
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const Vec& center() const { return center_; }
  double semi_a() const { return semi_a_; }
  double semi_b() const { return semi_b_; }
  double angle() const { return angle_; }
  const std::vector<Vec>& vertices() const { return verts_; }

 private:
  ConvexDomain() = default;

  int n_ = 0;
  Kind kind_ = Kind::Interval;
  double lo_ = 0.0, hi_ = 0.0;             // interval
  Vec center_;                             // disk / ellipse
  double semi_a_ = 0.0, semi_b_ = 0.0;     // disk: both = radius
  double angle_ = 0.0;                     // ellipse axis tilt
  std::vector<Vec> verts_;                 // polygon, counter-clockwise

  // Elliptic radius: |diag(1/a,1/b) R(-angle) (t - c)| (disk: |t-c|/r).
  double elliptic_radius(const Vec& t) const;
  Mat ellipse_rot() const;
};

}  // namespace asphere
