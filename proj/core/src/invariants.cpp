#include "asphere/invariants.hpp"

#include "asphere/legendre.hpp"
#include "hull_util.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

namespace asphere {
namespace {

void require_role(const PotentialField& src, PotentialRole want, const char* ctx) {
  if (src.role() != want) {
    std::ostringstream os;
    os << ctx << " needs a "
       << (want == PotentialRole::PotentialU ? "potential-u" : "graph-f")
       << " field";
    throw precondition_error("invariants", os.str());
  }
}

double hessian_det(const Mat& H) {
  return H.rows() == 1 ? H(0, 0) : H(0, 0) * H(1, 1) - H(0, 1) * H(1, 0);
}

// (det H)^p with the determinant required positive; evaluated in log space
// so n+2 powers of small determinants neither under- nor overflow.
double det_power(const Mat& H, double p, const char* ctx) {
  const double det = hessian_det(H);
  if (!(det > 0.0)) {
    std::ostringstream os;
    os << ctx << ": Hessian determinant not positive (det = " << det << ")";
    throw precondition_error("invariants", os.str());
  }
  return std::exp(p * std::log(det));
}

double negative_value(const PotentialField& u, const Vec& t, const char* ctx) {
  const double uv = u.value_at(t);
  if (!(uv < 0.0)) {
    std::ostringstream os;
    os << ctx << ": potential not negative at the point (u = " << uv << ")";
    throw precondition_error("invariants", os.str());
  }
  return uv;
}

}  // namespace

Mat metric_at(MetricKind kind, const PotentialField& source, const Vec& t) {
  const int n = source.dim();
  if (t.size() != n) throw precondition_error("invariants", "point dimension mismatch");
  if (kind == MetricKind::AffineGraph)
    require_role(source, PotentialRole::GraphF, "affine_graph metric");
  else
    require_role(source, PotentialRole::PotentialU, "potential-chart metric");

  const Mat H = source.hessian_at(t);
  switch (kind) {
    case MetricKind::Centroaffine: {
      const double uv = negative_value(source, t, "centroaffine metric");
      return (-1.0 / uv) * H;
    }
    case MetricKind::AffineRadial: {
      const double uv = negative_value(source, t, "affine_radial metric");
      const double s = det_power(H, -1.0 / (n + 2), "affine_radial metric");
      return (s / (uv * uv)) * H;
    }
    case MetricKind::Calabi: {
      const double s = det_power(H, 1.0 / (n + 2), "calabi metric");
      return s * H;
    }
    case MetricKind::AffineGraph: {
      const double s = det_power(H, -1.0 / (n + 2), "affine_graph metric");
      return s * H;
    }
  }
  throw error("invariants", "unknown metric kind");
}

MetricField metric_field(MetricKind kind, const PotentialField& source,
                         const std::vector<Vec>& points) {
  MetricField out;
  out.kind = kind;
  out.samples.reserve(points.size());
  for (const Vec& p : points)
    out.samples.push_back({p, metric_at(kind, source, p)});
  return out;
}

double affine_sphere_residual(const PotentialField& u, const Vec& t) {
  require_role(u, PotentialRole::PotentialU, "affine_sphere_residual");
  const int n = u.dim();
  const double uv = negative_value(u, t, "affine_sphere_residual");
  const Mat H = u.hessian_at(t);
  const double det = hessian_det(H);
  if (!(det > 0.0))
    throw precondition_error("invariants",
                             "affine_sphere_residual: Hessian determinant not positive");
  return std::log(det) + (n + 2) * std::log(-uv);
}

double coincidence_defect(const PotentialField& u, const Vec& t) {
  // exp(-R/(n+2)) - 1 where R is the log-form residual; equals
  // (det u_kl)^{-1/(n+2)} (-1/u) - 1.
  const double R = affine_sphere_residual(u, t);
  return std::expm1(-R / (u.dim() + 2));
}

ConormalSample conormals_at(const PotentialField& f, const Vec& x) {
  require_role(f, PotentialRole::GraphF, "conormals_at");
  const int n = f.dim();
  if (x.size() != n) throw precondition_error("invariants", "point dimension mismatch");

  const double fv = f.value_at(x);
  const Vec g = f.gradient_at(x);
  const Mat H = f.hessian_at(x);
  const double alpha = det_power(H, -1.0 / (n + 2), "conormals_at");

  Vec dir(n + 1);
  dir.head(n) = -g;
  dir[n] = 1.0;

  const double v = x.dot(g) - fv;
  if (std::abs(v) < 1e-12 * (1.0 + std::abs(fv)))
    throw error("invariants",
                "position vector tangent to the graph (x.grad f - f = 0); "
                "centroaffine conormal undefined");

  ConormalSample out;
  out.nu = alpha * dir;
  out.mu = (-1.0 / v) * dir;
  out.alpha = alpha;
  return out;
}

ConormalSample radial_conormals_at(const PotentialField& u, const Vec& t) {
  require_role(u, PotentialRole::PotentialU, "radial_conormals_at");
  const int n = u.dim();
  if (t.size() != n) throw precondition_error("invariants", "point dimension mismatch");

  const double val = u.value_at(t);
  if (!(val < 0.0))
    throw error("invariants", "potential is not negative at the sample");
  const Vec g = u.gradient_at(t);
  const double c = t.dot(g) - val;
  if (!(c > 1e-300))
    throw error("invariants", "position vector tangent to the radial graph");
  const Mat H = u.hessian_at(t);
  const double scale = det_power(H, -1.0 / (n + 2), "radial_conormals_at") / (-val);

  Vec dir(n + 1);
  dir.head(n) = -g;
  dir[n] = c;

  ConormalSample out;
  out.nu = scale * dir;
  out.mu = dir;
  out.alpha = out.nu[n];
  return out;
}

PotentialField centroaffine_dual(const PotentialField& u,
                                 const std::vector<Vec>& samples) {
  require_role(u, PotentialRole::PotentialU, "centroaffine_dual");
  const int n = u.dim();
  if (static_cast<int>(samples.size()) < n + 1)
    throw precondition_error("invariants", "centroaffine_dual needs at least dim+1 samples");

  const PotentialField f = radial_graph(u);
  const LegendrePair pair = legendre_transform(f);

  // Push each sample through the radial chart and the conormal map; the dual
  // surface point is -(1/v)(-y, 1), so the dual inhomogeneous coordinate is
  // eta = -y with y = grad f(x).
  std::vector<Vec> etas;
  etas.reserve(samples.size());
  const double inset = 1e-9 * f.domain().scale();
  for (const Vec& t : samples) {
    const double uv = negative_value(u, t, "centroaffine_dual");
    const Vec x = t / (-uv);
    if (!f.domain().contains(x, inset))
      throw error("invariants", "dual sample escapes the graph chart");
    const Vec y = f.gradient_at(x);
    const double v = x.dot(y) - f.value_at(x);
    if (v > -1e-12 * (1.0 + std::abs(f.value_at(x))))
      throw error("invariants",
                  "position vector tangent at a sample; dual chart undefined");
    etas.push_back(-y);
  }

  ConvexDomain dual_dom = [&]() {
    if (n == 1) {
      double lo = etas.front()[0], hi = lo;
      for (const Vec& e : etas) {
        lo = std::min(lo, e[0]);
        hi = std::max(hi, e[0]);
      }
      if (!(hi - lo > 0.0))
        throw error("invariants", "dual samples do not span a one-dimensional chart");
      const double pad = 1e-9 * (hi - lo);
      return ConvexDomain::interval(lo + pad, hi - pad);
    }
    auto hull = detail::convex_hull(etas);
    if (hull.size() < 3)
      throw error("invariants", "dual samples do not span a two-dimensional chart");
    return ConvexDomain::polygon(detail::shrink_about_centroid(hull, 1.0 - 1e-6));
  }();

  // u_dual(eta) = v(x(eta)); grad = -x; Hess = (Hess_x f)^{-1}. All through
  // the inverse gradient map y = -eta -> x.
  auto val = [pair](const Vec& eta) {
    const Vec y = -eta;
    const Vec x = pair.inverse(y);
    return x.dot(y) - pair.primal().value_at(x);
  };
  auto grd = [pair](const Vec& eta) { return Vec(-pair.inverse(-eta)); };
  auto hes = [pair](const Vec& eta) {
    const Vec x = pair.inverse(-eta);
    return Mat(pair.primal().hessian_at(x).inverse());
  };
  return PotentialField::analytic(PotentialRole::PotentialU, dual_dom, val, grd, hes);
}

InvariantsSample fubini_pick_at(const PotentialField& f, const Vec& x) {
  require_role(f, PotentialRole::GraphF, "fubini_pick_at");
  const int n = f.dim();
  if (x.size() != n) throw precondition_error("invariants", "point dimension mismatch");
  const double h = 1e-4 * (1.0 + x.norm());
  if (!f.domain().contains(x, 2.5 * h))
    throw precondition_error("invariants",
                             "fubini_pick_at stencil leaves the domain");

  // Conormal nu(p) = alpha (-grad f, 1) and its first partials, with
  // d alpha = -alpha/(n+2) tr(H^{-1} dH); dH by centered differences of the
  // (analytic) Hessian so only third-order data is differenced.
  auto nu_at = [&](const Vec& p) {
    const Vec g = f.gradient_at(p);
    const Mat H = f.hessian_at(p);
    const double alpha = det_power(H, -1.0 / (n + 2), "fubini_pick_at");
    Vec nu(n + 1);
    nu.head(n) = -alpha * g;
    nu[n] = alpha;
    return nu;
  };
  auto dnu_at = [&](const Vec& p) {
    const Vec g = f.gradient_at(p);
    const Mat H = f.hessian_at(p);
    const double alpha = det_power(H, -1.0 / (n + 2), "fubini_pick_at");
    const Mat Hinv = H.inverse();
    Mat out(n + 1, n);
    for (int k = 0; k < n; ++k) {
      Vec pp = p, pm = p;
      pp[k] += h;
      pm[k] -= h;
      const Mat dH = (f.hessian_at(pp) - f.hessian_at(pm)) / (2.0 * h);
      const double dalpha = -alpha / (n + 2) * (Hinv * dH).trace();
      out.col(k).head(n) = -dalpha * g - alpha * H.col(k);
      out(n, k) = dalpha;
    }
    return out;
  };

  // Affine metric, its Christoffel symbols (centered differences of g), and
  // the covariant Hessian of nu.
  const Mat g0 = metric_at(MetricKind::AffineGraph, f, x);
  const Mat ginv = g0.inverse();
  std::vector<Mat> dg(n);
  for (int k = 0; k < n; ++k) {
    Vec pp = x, pm = x;
    pp[k] += h;
    pm[k] -= h;
    dg[k] = (metric_at(MetricKind::AffineGraph, f, pp) -
             metric_at(MetricKind::AffineGraph, f, pm)) /
            (2.0 * h);
  }
  auto christoffel = [&](int k, int i, int j) {
    double s = 0.0;
    for (int l = 0; l < n; ++l)
      s += ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
    return 0.5 * s;
  };

  const Mat dnu0 = dnu_at(x);
  const Vec nu0 = nu_at(x);

  // Frame {nu_{,1}, ..., nu_{,n}, nu}; degeneracy means the extraction has no
  // unique solution.
  Mat frame(n + 1, n + 1);
  frame.leftCols(n) = dnu0;
  frame.col(n) = nu0;
  Eigen::JacobiSVD<Mat> svd(frame, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues()(n);
  const double smax = svd.singularValues()(0);
  if (!(smin > 0.0) || smax / smin > 1e8) {
    std::ostringstream os;
    os << "conormal frame degenerate (condition "
       << (smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity())
       << "); cubic form extraction failed";
    throw error("invariants", os.str());
  }
  const auto frame_lu = frame.partialPivLu();

  InvariantsSample out;
  out.g = g0;
  out.B = Mat::Zero(n, n);
  std::vector<Mat> Aup(n, Mat::Zero(n, n));  // Aup[k](i,j) = A_ij^k

  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      // Plain second partial of nu by centered differences of the
      // semi-analytic first partials, symmetrized in (i, j).
      Vec pp = x, pm = x;
      pp[i] += h;
      pm[i] -= h;
      Vec d2 = (dnu_at(pp).col(j) - dnu_at(pm).col(j)) / (2.0 * h);
      if (i != j) {
        Vec qp = x, qm = x;
        qp[j] += h;
        qm[j] -= h;
        d2 = 0.5 * (d2 + (dnu_at(qp).col(i) - dnu_at(qm).col(i)) / (2.0 * h));
      }
      Vec cov = d2;
      for (int k = 0; k < n; ++k) cov -= christoffel(k, i, j) * dnu0.col(k);

      // nu_{,ij} = -sum_k A_ij^k nu_{,k} - B_ij nu
      const Vec c = frame_lu.solve(Vec(-cov));
      for (int k = 0; k < n; ++k) {
        Aup[k](i, j) = c[k];
        Aup[k](j, i) = c[k];
      }
      out.B(i, j) = c[n];
      out.B(j, i) = c[n];
    }
  }

  // Lower the contravariant index: A_ijk = A_ij^l g_lk.
  out.A.assign(n, Mat::Zero(n, n));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += Aup[l](i, j) * g0(l, k);
        out.A[k](i, j) = s;
      }
  return out;
}

namespace {

// Adaptive Simpson bisection with Richardson end correction.
double simpson_recurse(const std::function<double(double)>& fn, double a, double fa,
                       double b, double fb, double m, double fm, double whole,
                       double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = fn(lm), frm = fn(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  // Acceptance far stricter than the classical 15*tol: the length integrands
  // develop near-boundary blowups for which the Richardson error model is
  // optimistic by several orders.  The rounding floor keeps refinement from
  // chasing integrand noise it can never resolve (delta stalls at a few ulps
  // of the panel sums once the integrand is rough at machine precision).
  const double floor = 1e-14 * (std::abs(left) + std::abs(right));
  if (depth <= 0 || std::abs(delta) <= std::max(0.1 * tol, floor))
    return left + right + delta / 15.0;
  return simpson_recurse(fn, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(fn, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& fn, double a, double b,
                        double rtol) {
  if (!(b > a)) return 0.0;
  const double fa = fn(a), fb = fn(b);
  const double m = 0.5 * (a + b);
  const double fm = fn(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double tol = std::max(rtol * std::abs(whole), 1e-300);
  return simpson_recurse(fn, a, fa, b, fb, m, fm, whole, tol, 48);
}

}  // namespace

double geodesic_length(const PotentialField& f, const Vec& y, double z0, double z1,
                       double rtol) {
  require_role(f, PotentialRole::GraphF, "geodesic_length");
  if (y.size() != f.dim())
    throw precondition_error("invariants", "ray direction dimension mismatch");
  if (!(z1 >= z0))
    throw precondition_error("invariants", "geodesic_length needs z1 >= z0");
  if (z1 == z0) return 0.0;
  if (!f.domain().contains(z0 * y, 0.0) || !f.domain().contains(z1 * y, 0.0))
    throw precondition_error("invariants", "geodesic segment exits the domain");

  auto integrand = [&](double z) {
    const Mat M = metric_at(MetricKind::AffineGraph, f, z * y);
    return std::sqrt(std::max(0.0, y.dot(M * y)));
  };
  return adaptive_simpson(integrand, z0, z1, rtol);
}

double metric_path_length(MetricKind kind, const PotentialField& source, const Vec& a,
                          const Vec& b, double rtol) {
  if (a.size() != source.dim() || b.size() != source.dim())
    throw precondition_error("invariants", "endpoint dimension mismatch");
  if (!source.domain().contains(a, 0.0) || !source.domain().contains(b, 0.0))
    throw precondition_error("invariants", "path segment exits the domain");
  const Vec d = b - a;
  if (d.norm() == 0.0) return 0.0;

  auto integrand = [&](double s) {
    const Mat M = metric_at(kind, source, a + s * d);
    return std::sqrt(std::max(0.0, d.dot(M * d)));
  };
  return adaptive_simpson(integrand, 0.0, 1.0, rtol);
}

}  // namespace asphere
