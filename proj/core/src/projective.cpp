#include "asphere/projective.hpp"

#include <cmath>

namespace asphere {

namespace {
constexpr const char* kMod = "projective";
}

ProjectiveMap ProjectiveMap::identity(int dim) {
  if (dim < 1 || dim > 2) throw precondition_error(kMod, "chart dimension must be 1 or 2");
  return ProjectiveMap(dim, Mat::Identity(dim + 1, dim + 1));
}

ProjectiveMap ProjectiveMap::normalized(const Mat& raw) {
  const int m = static_cast<int>(raw.rows());
  if (raw.cols() != m || (m != 2 && m != 3))
    throw precondition_error(kMod, "matrix must be 2x2 or 3x3");
  const double det = raw.determinant();
  const double scale = raw.cwiseAbs().maxCoeff();
  if (scale <= 0.0 || std::abs(det) < 1e-12 * std::pow(scale, m))
    throw precondition_error(kMod, "matrix is singular or nearly singular");
  // Divide by |det|^{1/(n+1)}: determinant becomes +-1, chart action unchanged.
  const Mat a = raw / std::pow(std::abs(det), 1.0 / m);
  return ProjectiveMap(m - 1, a);
}

ProjectiveMap ProjectiveMap::affine(const Mat& linear, const Vec& shift) {
  const int n = static_cast<int>(linear.rows());
  if (linear.cols() != n || shift.size() != n)
    throw precondition_error(kMod, "affine part dimensions mismatch");
  Mat raw = Mat::Zero(n + 1, n + 1);
  raw.topLeftCorner(n, n) = linear;
  raw.topRightCorner(n, 1) = shift;
  raw(n, n) = 1.0;
  return normalized(raw);
}

bool ProjectiveMap::is_affine(double tol) const {
  return a_.row(n_).head(n_).cwiseAbs().maxCoeff() <= tol * a_.cwiseAbs().maxCoeff();
}

ProjectiveMap ProjectiveMap::inverse() const {
  return normalized(a_.inverse());
}

ProjectiveMap ProjectiveMap::compose(const ProjectiveMap& other) const {
  if (other.n_ != n_) throw precondition_error(kMod, "composition dimension mismatch");
  return normalized(a_ * other.a_);
}

double ProjectiveMap::lambda(const Vec& t) const {
  if (t.size() != n_) throw precondition_error(kMod, "point dimension mismatch");
  return a_.row(n_).head(n_).dot(t) + a_(n_, n_);
}

Vec ProjectiveMap::apply(const Vec& t) const {
  const double lam = lambda(t);
  const double scale = a_.cwiseAbs().maxCoeff() * std::max(1.0, t.cwiseAbs().maxCoeff());
  if (lam <= 1e-12 * scale)
    throw error(kMod, "chart overflow: lambda = " + format_full(lam) +
                          " is not positive at the requested point");
  return (a_.topLeftCorner(n_, n_) * t + a_.topRightCorner(n_, 1)) / lam;
}

Mat ProjectiveMap::chart_jacobian(const Vec& t) const {
  const double lam = lambda(t);
  const Vec s = apply(t);  // also validates lambda > 0
  // d/dt_j (w_i / lam) = (A_ij - s_i * A_{n,j}) / lam
  Mat jac(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) jac(i, j) = (a_(i, j) - s(i) * a_(n_, j)) / lam;
  return jac;
}

}  // namespace asphere
