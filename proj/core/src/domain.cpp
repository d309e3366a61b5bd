#include "asphere/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace asphere {

namespace {
constexpr const char* kMod = "domain";
constexpr double kPi = 3.14159265358979323846;
}  // namespace

ConvexDomain ConvexDomain::interval(double lo, double hi) {
  if (!(lo < hi)) throw precondition_error(kMod, "interval requires lo < hi");
  ConvexDomain d;
  d.n_ = 1;
  d.kind_ = Kind::Interval;
  d.lo_ = lo;
  d.hi_ = hi;
  return d;
}

ConvexDomain ConvexDomain::disk(const Vec& center, double radius) {
  if (center.size() != 2) throw precondition_error(kMod, "disk center must be 2-D");
  if (!(radius > 0.0)) throw precondition_error(kMod, "disk radius must be positive");
  ConvexDomain d;
  d.n_ = 2;
  d.kind_ = Kind::Disk;
  d.center_ = center;
  d.semi_a_ = d.semi_b_ = radius;
  return d;
}

ConvexDomain ConvexDomain::ellipse(const Vec& center, double semi_a, double semi_b,
                                   double angle) {
  if (center.size() != 2) throw precondition_error(kMod, "ellipse center must be 2-D");
  if (!(semi_a > 0.0) || !(semi_b > 0.0))
    throw precondition_error(kMod, "ellipse semi-axes must be positive");
  ConvexDomain d;
  d.n_ = 2;
  d.kind_ = Kind::Ellipse;
  d.center_ = center;
  d.semi_a_ = semi_a;
  d.semi_b_ = semi_b;
  d.angle_ = angle;
  return d;
}

ConvexDomain ConvexDomain::polygon(std::vector<Vec> vertices) {
  const int m = static_cast<int>(vertices.size());
  if (m < 3) throw precondition_error(kMod, "polygon needs at least 3 vertices");
  for (const Vec& v : vertices)
    if (v.size() != 2) throw precondition_error(kMod, "polygon vertices must be 2-D");
  // Signed area fixes orientation; strict convexity = all turns the same way.
  double area2 = 0.0;
  for (int i = 0; i < m; ++i) {
    const Vec& p = vertices[i];
    const Vec& q = vertices[(i + 1) % m];
    area2 += p(0) * q(1) - q(0) * p(1);
  }
  if (area2 < 0.0) std::reverse(vertices.begin(), vertices.end());
  double scale = 0.0;
  for (const Vec& v : vertices) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * std::max(1.0, scale * scale);
  for (int i = 0; i < m; ++i) {
    const Vec& a = vertices[i];
    const Vec& b = vertices[(i + 1) % m];
    const Vec& c = vertices[(i + 2) % m];
    const double cross =
        (b(0) - a(0)) * (c(1) - b(1)) - (b(1) - a(1)) * (c(0) - b(0));
    if (cross <= tol)
      throw precondition_error(kMod, "polygon is not strictly convex");
  }
  ConvexDomain d;
  d.n_ = 2;
  d.kind_ = Kind::Polygon;
  d.verts_ = std::move(vertices);
  return d;
}

ConvexDomain ConvexDomain::unit_ball(int dim) {
  if (dim == 1) return interval(-1.0, 1.0);
  if (dim == 2) return disk(Vec::Zero(2), 1.0);
  throw precondition_error(kMod, "dimension must be 1 or 2");
}

ConvexDomain ConvexDomain::square(double half_width) {
  if (!(half_width > 0.0)) throw precondition_error(kMod, "square half-width must be positive");
  const double a = half_width;
  return polygon({vec2(-a, -a), vec2(a, -a), vec2(a, a), vec2(-a, a)});
}

std::string ConvexDomain::kind_name() const {
  switch (kind_) {
    case Kind::Interval: return "interval";
    case Kind::Disk: return "disk";
    case Kind::Ellipse: return "ellipse";
    case Kind::Polygon: return "polygon";
  }
  return "?";
}

Mat ConvexDomain::ellipse_rot() const {
  Mat r(2, 2);
  const double c = std::cos(angle_), s = std::sin(angle_);
  r << c, -s, s, c;
  return r;
}

double ConvexDomain::elliptic_radius(const Vec& t) const {
  const Vec d = t - center_;
  if (kind_ == Kind::Disk) return d.norm() / semi_a_;
  const Vec e = ellipse_rot().transpose() * d;
  return std::hypot(e(0) / semi_a_, e(1) / semi_b_);
}

bool ConvexDomain::contains(const Vec& t, double margin) const {
  if (t.size() != n_) throw precondition_error(kMod, "point dimension mismatch");
  switch (kind_) {
    case Kind::Interval:
      return t(0) > lo_ + margin && t(0) < hi_ - margin;
    case Kind::Disk:
      return (t - center_).norm() < semi_a_ - margin;
    case Kind::Ellipse: {
      const double b = std::min(semi_a_, semi_b_);
      return elliptic_radius(t) < 1.0 - margin / b;
    }
    case Kind::Polygon: {
      const int m = static_cast<int>(verts_.size());
      for (int i = 0; i < m; ++i) {
        const Vec& a = verts_[i];
        const Vec& b = verts_[(i + 1) % m];
        Vec edge = b - a;
        // Inward normal of a ccw edge is (-edge_y, edge_x).
        const double nx = -edge(1), ny = edge(0);
        const double len = std::hypot(nx, ny);
        const double dist = (nx * (t(0) - a(0)) + ny * (t(1) - a(1))) / len;
        if (!(dist > margin)) return false;
      }
      return true;
    }
  }
  return false;
}

double ConvexDomain::boundary_distance(const Vec& t) const {
  switch (kind_) {
    case Kind::Interval:
      return std::min(t(0) - lo_, hi_ - t(0));
    case Kind::Disk:
      return semi_a_ - (t - center_).norm();
    case Kind::Ellipse:
      return std::min(semi_a_, semi_b_) * (1.0 - elliptic_radius(t));
    case Kind::Polygon: {
      double best = std::numeric_limits<double>::infinity();
      const int m = static_cast<int>(verts_.size());
      for (int i = 0; i < m; ++i) {
        const Vec& a = verts_[i];
        const Vec& b = verts_[(i + 1) % m];
        Vec edge = b - a;
        const double nx = -edge(1), ny = edge(0);
        const double len = std::hypot(nx, ny);
        best = std::min(best, (nx * (t(0) - a(0)) + ny * (t(1) - a(1))) / len);
      }
      return best;
    }
  }
  return 0.0;
}

double ConvexDomain::exit_distance(const Vec& from, const Vec& dir) const {
  if (!contains(from)) throw precondition_error(kMod, "exit_distance needs an interior start");
  const double dn = dir.norm();
  if (!(dn > 0.0)) throw precondition_error(kMod, "exit_distance needs a nonzero direction");
  switch (kind_) {
    case Kind::Interval:
      return dir(0) > 0.0 ? (hi_ - from(0)) / dir(0) : (lo_ - from(0)) / dir(0);
    case Kind::Disk:
    case Kind::Ellipse: {
      // Map to the unit circle; solve |e + s q| = 1 for s > 0.
      Vec e = from - center_, q = dir;
      if (kind_ == Kind::Ellipse) {
        const Mat rt = ellipse_rot().transpose();
        e = rt * e;
        q = rt * q;
      }
      e(0) /= semi_a_; e(1) /= semi_b_;
      q(0) /= semi_a_; q(1) /= semi_b_;
      const double a = q.squaredNorm();
      const double b = e.dot(q);
      const double c = e.squaredNorm() - 1.0;
      return (-b + std::sqrt(b * b - a * c)) / a;
    }
    case Kind::Polygon: {
      double best = std::numeric_limits<double>::infinity();
      const int m = static_cast<int>(verts_.size());
      for (int i = 0; i < m; ++i) {
        const Vec& a = verts_[i];
        const Vec& b = verts_[(i + 1) % m];
        Vec edge = b - a;
        const double nx = -edge(1), ny = edge(0);  // inward normal (unnormalized)
        const double dd = nx * dir(0) + ny * dir(1);
        if (dd < 0.0) {  // heading out through this edge's half-plane
          const double s = (nx * (from(0) - a(0)) + ny * (from(1) - a(1))) / -dd;
          best = std::min(best, s);
        }
      }
      return best;
    }
  }
  return 0.0;
}

std::pair<Vec, Vec> ConvexDomain::bounding_box() const {
  switch (kind_) {
    case Kind::Interval:
      return {vec1(lo_), vec1(hi_)};
    case Kind::Disk:
      return {center_ - Vec::Constant(2, semi_a_), center_ + Vec::Constant(2, semi_a_)};
    case Kind::Ellipse: {
      // Extent of R diag(a,b) S^1 along axis i is sqrt(sum_j (R D)_{ij}^2).
      const Mat rd = ellipse_rot() * Eigen::DiagonalMatrix<double, 2>(semi_a_, semi_b_);
      Vec ext(2);
      ext << rd.row(0).norm(), rd.row(1).norm();
      return {center_ - ext, center_ + ext};
    }
    case Kind::Polygon: {
      Vec lo = verts_[0], hi = verts_[0];
      for (const Vec& v : verts_) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
      }
      return {lo, hi};
    }
  }
  return {Vec(), Vec()};
}

Vec ConvexDomain::centroid() const {
  switch (kind_) {
    case Kind::Interval:
      return vec1(0.5 * (lo_ + hi_));
    case Kind::Disk:
    case Kind::Ellipse:
      return center_;
    case Kind::Polygon: {
      Vec c = Vec::Zero(2);
      for (const Vec& v : verts_) c += v;
      return c / static_cast<double>(verts_.size());
    }
  }
  return Vec();
}

double ConvexDomain::scale() const {
  auto [lo, hi] = bounding_box();
  return (hi - lo).norm();
}

std::vector<Vec> ConvexDomain::boundary_points(int count) const {
  if (count < 2) throw precondition_error(kMod, "boundary_points needs count >= 2");
  std::vector<Vec> pts;
  switch (kind_) {
    case Kind::Interval:
      pts.push_back(vec1(lo_));
      pts.push_back(vec1(hi_));
      break;
    case Kind::Disk:
    case Kind::Ellipse: {
      const Mat r = ellipse_rot();
      for (int k = 0; k < count; ++k) {
        const double phi = 2.0 * kPi * k / count;
        Vec e = vec2(semi_a_ * std::cos(phi), semi_b_ * std::sin(phi));
        pts.push_back(center_ + r * e);
      }
      break;
    }
    case Kind::Polygon: {
      const int m = static_cast<int>(verts_.size());
      const int per_edge = std::max(1, count / m);
      for (int i = 0; i < m; ++i) {
        const Vec& a = verts_[i];
        const Vec& b = verts_[(i + 1) % m];
        for (int k = 0; k < per_edge; ++k)
          pts.push_back(a + (b - a) * (static_cast<double>(k) / per_edge));
      }
      break;
    }
  }
  return pts;
}

ConvexDomain ConvexDomain::transformed(const ProjectiveMap& map) const {
  if (map.dim() != n_) throw precondition_error(kMod, "map dimension mismatch");
  // lambda is affine in t, so positivity on the closure follows from
  // positivity at extreme points (vertices / ellipse support points).
  const auto check_lambda = [&](const Vec& t) {
    if (map.lambda(t) <= 1e-12 * std::max(1.0, scale()))
      throw error(kMod, "chart overflow: the map's hyperplane at infinity meets the domain closure");
  };
  switch (kind_) {
    case Kind::Interval: {
      check_lambda(vec1(lo_));
      check_lambda(vec1(hi_));
      const double p = map.apply(vec1(lo_))(0);
      const double q = map.apply(vec1(hi_))(0);
      return interval(std::min(p, q), std::max(p, q));
    }
    case Kind::Disk:
    case Kind::Ellipse: {
      // min over the ellipse of the affine function lambda(t) = g.t + g0.
      const Mat& a = map.matrix();
      const Vec g = a.row(2).head(2);
      const double at_center = map.lambda(center_);
      const Mat rd = ellipse_rot() * Eigen::DiagonalMatrix<double, 2>(semi_a_, semi_b_);
      const double dip = (rd.transpose() * g).norm();
      if (at_center - dip <= 1e-12 * std::max(1.0, scale()))
        throw error(kMod, "chart overflow: the map's hyperplane at infinity meets the domain closure");
      // Boundary conic (p,1)^T Q (p,1) = 0 maps to B^T Q B with B = map^{-1}.
      const Mat rot = ellipse_rot();
      Mat m2 = rot * Eigen::DiagonalMatrix<double, 2>(1.0 / (semi_a_ * semi_a_),
                                                      1.0 / (semi_b_ * semi_b_)) *
               rot.transpose();
      Mat q = Mat::Zero(3, 3);
      q.topLeftCorner(2, 2) = m2;
      q.topRightCorner(2, 1) = -m2 * center_;
      q.bottomLeftCorner(1, 2) = (-m2 * center_).transpose();
      q(2, 2) = center_.dot(m2 * center_) - 1.0;
      const Mat b = map.inverse().matrix();
      const Mat qt = b.transpose() * q * b;
      const Mat mt = qt.topLeftCorner(2, 2);
      const Vec bt = qt.topRightCorner(2, 1);
      const Vec c_new = mt.fullPivLu().solve(-bt);
      const double kappa = c_new.dot(mt * c_new) - qt(2, 2);
      const Mat shape = mt / kappa;  // (s-c)^T shape (s-c) = 1
      Eigen::SelfAdjointEigenSolver<Mat> eig(shape);
      if (eig.eigenvalues().minCoeff() <= 0.0)
        throw error(kMod, "transformed conic is not an ellipse");
      const double a1 = 1.0 / std::sqrt(eig.eigenvalues()(0));
      const double a2 = 1.0 / std::sqrt(eig.eigenvalues()(1));
      const Vec v2 = eig.eigenvectors().col(1);  // axis of the smaller radius a2
      if (std::abs(a1 - a2) <= 1e-12 * (a1 + a2)) return disk(c_new, 0.5 * (a1 + a2));
      // Report the larger semi-axis along its eigenvector's angle.
      const Vec v1 = eig.eigenvectors().col(0);
      (void)v2;
      return ellipse(c_new, a1, a2, std::atan2(v1(1), v1(0)));
    }
    case Kind::Polygon: {
      std::vector<Vec> imgs;
      imgs.reserve(verts_.size());
      for (const Vec& v : verts_) {
        check_lambda(v);
        imgs.push_back(map.apply(v));
      }
      return polygon(std::move(imgs));
    }
  }
  throw error(kMod, "unreachable");
}

}  // namespace asphere
