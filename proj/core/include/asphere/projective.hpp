#pragma once

#include "asphere/types.hpp"

namespace asphere {

// Projective transformation of the t-chart, represented by an (n+1)x(n+1)
// matrix acting on homogeneous coordinates (t, 1), normalized to |det| = 1.
// The chart action is  t -> w / lambda  where (w, lambda) = A (t, 1); it is
// only defined where lambda > 0 (points crossing lambda = 0 leave the chart).
class ProjectiveMap {
 public:
  static ProjectiveMap identity(int dim);
  // Normalizes an arbitrary nonsingular (n+1)x(n+1) matrix to |det| = 1.
  static ProjectiveMap normalized(const Mat& raw);
  // Affine special case s = M t + b, normalized the same way.
  static ProjectiveMap affine(const Mat& linear, const Vec& shift);

  int dim() const { return n_; }
  const Mat& matrix() const { return a_; }
  bool is_affine(double tol = 1e-14) const;

  ProjectiveMap inverse() const;
  // Composition acting as apply(t) = this(other(t)).
  ProjectiveMap compose(const ProjectiveMap& other) const;

  // Last homogeneous coordinate of A (t, 1); the chart is valid where > 0.
  double lambda(const Vec& t) const;
  Vec apply(const Vec& t) const;
  // Derivative d apply / dt, an n x n matrix.
  Mat chart_jacobian(const Vec& t) const;

 private:
  ProjectiveMap(int n, Mat a) : n_(n), a_(std::move(a)) {}
  int n_;
  Mat a_;
};

}  // namespace asphere
