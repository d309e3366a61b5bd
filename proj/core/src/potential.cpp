#include "asphere/potential.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "stencil_util.hpp"

namespace asphere {

namespace {

constexpr double kDefaultChartRadius = 1e3;

double clamped_step(const ConvexDomain& dom, const Vec& t, int axis, double want) {
  // Largest |step| <= want keeping t +- step*e_axis inside the domain.
  Vec dir = Vec::Zero(t.size());
  dir[axis] = 1.0;
  double plus = dom.exit_distance(t, dir);
  dir[axis] = -1.0;
  double minus = dom.exit_distance(t, dir);
  return std::min(want, 0.45 * std::min(plus, minus));
}

}  // namespace

struct PotentialField::Impl {
  PotentialRole role = PotentialRole::Scalar;
  ConvexDomain dom = ConvexDomain::interval(-1.0, 1.0);
  int n = 1;

  // analytic
  ValueFn value;
  GradFn grad;
  HessFn hess;

  // grid
  std::optional<GridSpec> gspec;
  Vec vals;
  bool bzero = false;
  std::vector<Vec> gcache;
  std::vector<Mat> hcache;
  // substitution caches (potential-u with zero boundary data): derivatives of
  // w = u^2, which stays smooth across the boundary where u has a square-root
  // singularity; off-node evaluation Taylor-expands w, not u.
  bool substitution = false;
  Vec wvals;
  std::vector<Vec> wgrad;
  std::vector<Mat> whess;

  Vec base;

  bool is_grid() const { return gspec.has_value(); }

  void check_inside(const Vec& t) const {
    if (static_cast<int>(t.size()) != n)
      throw precondition_error("potential", "point dimension mismatch");
    if (!dom.contains(t, -1e-9 * dom.scale()))
      throw precondition_error("potential", "point outside domain");
  }

  // ---- analytic evaluation ----------------------------------------------
  double a_value(const Vec& t) const { return value(t); }

  Vec a_gradient(const Vec& t) const {
    if (grad) return grad(t);
    Vec g(n);
    for (int a = 0; a < n; ++a) {
      double h = clamped_step(dom, t, a, 6e-6 * (1.0 + t.norm()));
      Vec tp = t, tm = t;
      if (h < 1e-14) {  // on the boundary: one-sided
        Vec dir = Vec::Zero(n);
        dir[a] = 1.0;
        double room = dom.exit_distance(t, dir);
        double s = room > 1e-12 ? 1.0 : -1.0;
        double hh = 6e-6 * (1.0 + t.norm());
        tp[a] += s * hh;
        tm[a] += s * 2.0 * hh;
        g[a] = s * (-3.0 * value(t) + 4.0 * value(tp) - value(tm)) / (2.0 * hh);
        continue;
      }
      tp[a] += h;
      tm[a] -= h;
      g[a] = (value(tp) - value(tm)) / (2.0 * h);
    }
    return g;
  }

  Mat a_hessian(const Vec& t) const {
    if (hess) return hess(t);
    Mat H(n, n);
    const double base_h = 1.2e-4 * (1.0 + t.norm());
    if (grad) {  // difference the exact gradient: more accurate
      for (int a = 0; a < n; ++a) {
        double h = clamped_step(dom, t, a, base_h);
        if (h < 1e-14) h = base_h;
        Vec tp = t, tm = t;
        tp[a] += h;
        tm[a] -= h;
        H.col(a) = (grad(tp) - grad(tm)) / (2.0 * h);
      }
      return 0.5 * (H + H.transpose());
    }
    for (int a = 0; a < n; ++a) {
      double ha = clamped_step(dom, t, a, base_h);
      if (ha < 1e-14) ha = base_h;
      Vec tp = t, tm = t;
      tp[a] += ha;
      tm[a] -= ha;
      H(a, a) = (value(tp) - 2.0 * value(t) + value(tm)) / (ha * ha);
      for (int b = a + 1; b < n; ++b) {
        double hb = clamped_step(dom, t, b, base_h);
        if (hb < 1e-14) hb = base_h;
        Vec tpp = t, tpm = t, tmp = t, tmm = t;
        tpp[a] += ha; tpp[b] += hb;
        tpm[a] += ha; tpm[b] -= hb;
        tmp[a] -= ha; tmp[b] += hb;
        tmm[a] -= ha; tmm[b] -= hb;
        H(a, b) = H(b, a) =
            (value(tpp) - value(tpm) - value(tmp) + value(tmm)) / (4.0 * ha * hb);
      }
    }
    return H;
  }

  // ---- grid caches --------------------------------------------------------
  void build_caches() {
    const GridSpec& g = *gspec;
    const int m = g.interior_count();
    gcache.assign(m, Vec::Zero(n));
    hcache.assign(m, Mat::Zero(n, n));
    substitution = (role == PotentialRole::PotentialU) && bzero;
    if (substitution) {
      wvals = vals.array().square().matrix();
      wgrad.assign(m, Vec::Zero(n));
      whess.assign(m, Mat::Zero(n, n));
    }
    const Vec& w = wvals;

    for (int k = 0; k < m; ++k) {
      const int flat = g.interior()[k];
      auto [i, j] = g.multi_index(flat);
      Vec grd = Vec::Zero(n);
      Mat H = Mat::Zero(n, n);

      if (substitution) {
        // Derivatives of u = -sqrt(w) through Shortley-Weller stencils on
        // w = u^2, which extends smoothly (quadratically) across boundaries
        // where u has infinite slope. w = 0 exactly at cut points.
        const double wc = w[k];
        Vec gw = Vec::Zero(n);
        Mat Hw = Mat::Zero(n, n);
        for (int a = 0; a < n; ++a) {
          const auto& ap = g.arm(k, a, 1);
          const auto& am = g.arm(k, a, 0);
          const double wp = ap.rank >= 0 ? w[ap.rank] : 0.0;
          const double wm = am.rank >= 0 ? w[am.rank] : 0.0;
          detail::Axis1D st(ap.dist, am.dist);
          Hw(a, a) = st.d2_p * wp + st.d2_m * wm + st.d2_c * wc;
          gw[a] = st.d1_p * wp + st.d1_m * wm + st.d1_c * wc;
        }
        if (n == 2) Hw(0, 1) = Hw(1, 0) = cross_term(i, j, w, wc);
        wgrad[k] = gw;
        whess[k] = Hw;
        const double u = vals[k];
        grd = gw / (2.0 * u);
        H = (Hw - gw * gw.transpose() / (2.0 * wc)) / (2.0 * u);
      } else {
        const double vc = vals[k];
        for (int a = 0; a < n; ++a) {
          const auto& ap = g.arm(k, a, 1);
          const auto& am = g.arm(k, a, 0);
          const double h = g.spacing(a);
          if (ap.rank >= 0 && am.rank >= 0) {
            H(a, a) = (vals[ap.rank] - 2.0 * vc + vals[am.rank]) / (h * h);
            grd[a] = (vals[ap.rank] - vals[am.rank]) / (2.0 * h);
          } else if (bzero && (ap.rank >= 0 || am.rank >= 0 ||
                               (ap.dist > 0 && am.dist > 0))) {
            const double vp = ap.rank >= 0 ? vals[ap.rank] : 0.0;
            const double vm = am.rank >= 0 ? vals[am.rank] : 0.0;
            detail::Axis1D st(ap.dist, am.dist);
            H(a, a) = st.d2_p * vp + st.d2_m * vm + st.d2_c * vc;
            grd[a] = st.d1_p * vp + st.d1_m * vm + st.d1_c * vc;
          } else {
            one_sided(i, j, a, ap.rank >= 0, vc, grd[a], H(a, a));
          }
        }
        if (n == 2) H(0, 1) = H(1, 0) = cross_term(i, j, vals, vc);
      }
      gcache[k] = grd;
      hcache[k] = H;
    }
  }

  // Second-order one-sided axis stencils for masked interior nodes without a
  // neighbor on one side and no boundary data to lean on.
  void one_sided(int i, int j, int axis, bool plus_side, double vc, double& d1,
                 double& d2) const {
    const GridSpec& g = *gspec;
    const double h = g.spacing(axis);
    const int s = plus_side ? 1 : -1;
    const int di = axis == 0 ? s : 0;
    const int dj = axis == 1 ? s : 0;
    const int r1 = g.interior_rank_at(i + di, j + dj);
    const int r2 = g.interior_rank_at(i + 2 * di, j + 2 * dj);
    const int r3 = g.interior_rank_at(i + 3 * di, j + 3 * dj);
    if (r1 < 0) {
      d1 = 0.0;
      d2 = 0.0;
      return;
    }
    if (r2 < 0) {
      d1 = s * (vals[r1] - vc) / h;
      d2 = 0.0;
      return;
    }
    d1 = s * (-3.0 * vc + 4.0 * vals[r1] - vals[r2]) / (2.0 * h);
    d2 = r3 >= 0 ? (2.0 * vc - 5.0 * vals[r1] + 4.0 * vals[r2] - vals[r3]) / (h * h)
                 : (vc - 2.0 * vals[r1] + vals[r2]) / (h * h);
  }

  // Mixed second difference with graceful degradation near the mask edge:
  // the full four-point formula when all diagonal neighbors exist, otherwise
  // the average of the available one-sided corner formulas, otherwise zero.
  double cross_term(int i, int j, const Vec& v, double vc) const {
    const GridSpec& g = *gspec;
    const double hx = g.spacing(0), hy = g.spacing(1);
    auto at = [&](int ii, int jj) { return g.interior_rank_at(ii, jj); };
    const int dpp = at(i + 1, j + 1), dpm = at(i + 1, j - 1);
    const int dmp = at(i - 1, j + 1), dmm = at(i - 1, j - 1);
    if (dpp >= 0 && dpm >= 0 && dmp >= 0 && dmm >= 0)
      return (v[dpp] - v[dpm] - v[dmp] + v[dmm]) / (4.0 * hx * hy);
    double sum = 0.0;
    int count = 0;
    for (int sx = -1; sx <= 1; sx += 2) {
      for (int sy = -1; sy <= 1; sy += 2) {
        const int c11 = at(i + sx, j + sy);
        const int c10 = at(i + sx, j);
        const int c01 = at(i, j + sy);
        if (c11 >= 0 && c10 >= 0 && c01 >= 0) {
          sum += sx * sy * (v[c11] - v[c10] - v[c01] + vc) / (hx * hy);
          ++count;
        }
      }
    }
    return count > 0 ? sum / count : 0.0;
  }

  // ---- grid evaluation ----------------------------------------------------
  int nearest_interior(const Vec& t) const {
    const GridSpec& g = *gspec;
    const int N = g.nodes_per_axis();
    auto [lo, hi] = dom.bounding_box();
    int ci = static_cast<int>(std::lround((t[0] - lo[0]) / g.spacing(0)));
    int cj = n == 2 ? static_cast<int>(std::lround((t[1] - lo[1]) / g.spacing(1))) : 0;
    ci = std::clamp(ci, 0, N - 1);
    cj = std::clamp(cj, 0, N - 1);
    double best = std::numeric_limits<double>::infinity();
    int best_rank = -1;
    for (int ring = 0; ring <= 4; ++ring) {
      for (int di = -ring; di <= ring; ++di) {
        for (int dj = -ring; dj <= ring; ++dj) {
          if (std::max(std::abs(di), std::abs(dj)) != ring) continue;
          if (n == 1 && dj != 0) continue;
          const int r = g.interior_rank_at(ci + di, cj + dj);
          if (r < 0) continue;
          const double d = (g.node_point(g.interior()[r]) - t).norm();
          if (d < best) {
            best = d;
            best_rank = r;
          }
        }
      }
      if (best_rank >= 0) break;
    }
    if (best_rank < 0) throw error("potential", "no interior grid node near point");
    return best_rank;
  }

  // Corner ranks of the cell containing t, or empty if any corner is
  // outside the interior mask.
  bool cell_corners(const Vec& t, int ranks[4], double frac[2]) const {
    const GridSpec& g = *gspec;
    const int N = g.nodes_per_axis();
    auto [lo, hi] = dom.bounding_box();
    int i0 = static_cast<int>(std::floor((t[0] - lo[0]) / g.spacing(0)));
    i0 = std::clamp(i0, 0, N - 2);
    frac[0] = (t[0] - lo[0]) / g.spacing(0) - i0;
    if (n == 1) {
      ranks[0] = g.interior_rank_at(i0);
      ranks[1] = g.interior_rank_at(i0 + 1);
      return ranks[0] >= 0 && ranks[1] >= 0;
    }
    int j0 = static_cast<int>(std::floor((t[1] - lo[1]) / g.spacing(1)));
    j0 = std::clamp(j0, 0, N - 2);
    frac[1] = (t[1] - lo[1]) / g.spacing(1) - j0;
    ranks[0] = g.interior_rank_at(i0, j0);
    ranks[1] = g.interior_rank_at(i0 + 1, j0);
    ranks[2] = g.interior_rank_at(i0, j0 + 1);
    ranks[3] = g.interior_rank_at(i0 + 1, j0 + 1);
    return ranks[0] >= 0 && ranks[1] >= 0 && ranks[2] >= 0 && ranks[3] >= 0;
  }

  // Multilinear weights over the cell corners, when all corners are interior.
  bool corner_weights(const Vec& t, int ranks[4], double wts[4], int& count) const {
    double fr[2];
    if (!cell_corners(t, ranks, fr)) return false;
    if (n == 1) {
      wts[0] = 1.0 - fr[0];
      wts[1] = fr[0];
      count = 2;
    } else {
      wts[0] = (1.0 - fr[0]) * (1.0 - fr[1]);
      wts[1] = fr[0] * (1.0 - fr[1]);
      wts[2] = (1.0 - fr[0]) * fr[1];
      wts[3] = fr[0] * fr[1];
      count = 4;
    }
    return true;
  }

  // Quadratic expansion of w = u^2 about the nearest interior node. w is
  // smooth up to the boundary (u itself has infinite slope there), so this
  // stays accurate in cut cells and reproduces the square-root blowup of the
  // derivatives of u exactly where it matters.
  struct WExpansion {
    double w;
    Vec gw;
    Mat Hw;
  };
  WExpansion w_taylor(const Vec& t) const {
    const int k = nearest_interior(t);
    const Vec d = t - gspec->node_point(gspec->interior()[k]);
    WExpansion e;
    e.Hw = whess[k];
    e.gw = wgrad[k] + whess[k] * d;
    e.w = std::max(wvals[k] + wgrad[k].dot(d) + 0.5 * d.dot(whess[k] * d),
                   1e-280);
    return e;
  }

  double g_value(const Vec& t) const {
    if (substitution) return -std::sqrt(w_taylor(t).w);
    int ranks[4];
    double wts[4];
    int count = 0;
    if (corner_weights(t, ranks, wts, count)) {
      double acc = 0.0;
      for (int c = 0; c < count; ++c) acc += wts[c] * vals[ranks[c]];
      return acc;
    }
    const int k = nearest_interior(t);
    const Vec d = t - gspec->node_point(gspec->interior()[k]);
    return vals[k] + gcache[k].dot(d) + 0.5 * d.dot(hcache[k] * d);
  }

  Vec g_gradient(const Vec& t) const {
    if (substitution) {
      const WExpansion e = w_taylor(t);
      return e.gw / (2.0 * -std::sqrt(e.w));
    }
    int ranks[4];
    double wts[4];
    int count = 0;
    if (corner_weights(t, ranks, wts, count)) {
      Vec acc = Vec::Zero(n);
      for (int c = 0; c < count; ++c) acc += wts[c] * gcache[ranks[c]];
      return acc;
    }
    const int k = nearest_interior(t);
    const Vec d = t - gspec->node_point(gspec->interior()[k]);
    return gcache[k] + hcache[k] * d;
  }

  Mat g_hessian(const Vec& t) const {
    if (substitution) {
      const WExpansion e = w_taylor(t);
      return (e.Hw - e.gw * e.gw.transpose() / (2.0 * e.w)) /
             (2.0 * -std::sqrt(e.w));
    }
    int ranks[4];
    double wts[4];
    int count = 0;
    if (corner_weights(t, ranks, wts, count)) {
      Mat acc = Mat::Zero(n, n);
      for (int c = 0; c < count; ++c) acc += wts[c] * hcache[ranks[c]];
      return acc;
    }
    return hcache[nearest_interior(t)];
  }

  void locate_base() {
    if (is_grid()) {
      const GridSpec& g = *gspec;
      int bk = 0;
      for (int k = 1; k < g.interior_count(); ++k)
        if (vals[k] < vals[bk]) bk = k;
      base = g.node_point(g.interior()[bk]);
      return;
    }
    auto [lo, hi] = dom.bounding_box();
    const int M = 33;
    double bestv = std::numeric_limits<double>::infinity();
    Vec bestp = dom.centroid();
    const double margin = 1e-6 * dom.scale();
    for (int i = 0; i < M; ++i) {
      for (int j = 0; j < (n == 2 ? M : 1); ++j) {
        Vec p(n);
        p[0] = lo[0] + (hi[0] - lo[0]) * (i + 0.5) / M;
        if (n == 2) p[1] = lo[1] + (hi[1] - lo[1]) * (j + 0.5) / M;
        if (!dom.contains(p, margin)) continue;
        const double v = value(p);
        if (v < bestv) {
          bestv = v;
          bestp = p;
        }
      }
    }
    // Newton refinement toward the stationary point.
    for (int it = 0; it < 8; ++it) {
      Vec gr = a_gradient(bestp);
      if (gr.norm() <= 1e-13 * (1.0 + std::abs(bestv))) break;
      Mat H = a_hessian(bestp);
      Eigen::SelfAdjointEigenSolver<Mat> es(H);
      if (es.eigenvalues().minCoeff() <= 0.0) break;
      Vec step = -H.ldlt().solve(gr);
      double scale = 1.0;
      for (int bt = 0; bt < 20; ++bt) {
        Vec cand = bestp + scale * step;
        if (dom.contains(cand, margin) && value(cand) <= bestv) {
          bestp = cand;
          bestv = value(cand);
          break;
        }
        scale *= 0.5;
      }
    }
    base = bestp;
  }

  void check_role() const {
    if (role != PotentialRole::PotentialU) return;
    if (is_grid()) {
      if ((vals.array() >= 0.0).any())
        throw precondition_error("potential", "potential-u grid field has nonnegative interior values");
      return;
    }
    auto [lo, hi] = dom.bounding_box();
    const int M = 9;
    const double margin = 1e-3 * dom.scale();
    for (int i = 0; i < M; ++i) {
      for (int j = 0; j < (n == 2 ? M : 1); ++j) {
        Vec p(n);
        p[0] = lo[0] + (hi[0] - lo[0]) * (i + 0.5) / M;
        if (n == 2) p[1] = lo[1] + (hi[1] - lo[1]) * (j + 0.5) / M;
        if (!dom.contains(p, margin)) continue;
        if (value(p) >= 0.0)
          throw precondition_error("potential", "potential-u field nonnegative at an interior sample");
      }
    }
  }
};

PotentialField::PotentialField(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

PotentialField PotentialField::analytic(PotentialRole role, ConvexDomain domain,
                                        ValueFn value, GradFn gradient, HessFn hessian) {
  if (!value) throw precondition_error("potential", "value callback required");
  auto impl = std::make_shared<Impl>();
  impl->role = role;
  impl->dom = std::move(domain);
  impl->n = impl->dom.dim();
  impl->value = std::move(value);
  impl->grad = std::move(gradient);
  impl->hess = std::move(hessian);
  impl->check_role();
  impl->locate_base();
  return PotentialField(impl);
}

PotentialField PotentialField::grid(PotentialRole role, GridSpec grid_spec,
                                    Vec interior_values, bool boundary_zero) {
  auto impl = std::make_shared<Impl>();
  impl->role = role;
  impl->dom = grid_spec.domain();
  impl->n = impl->dom.dim();
  if (interior_values.size() != grid_spec.interior_count())
    throw precondition_error("potential", "value vector does not match grid interior size");
  impl->gspec = std::move(grid_spec);
  impl->vals = std::move(interior_values);
  impl->bzero = boundary_zero;
  impl->check_role();
  impl->build_caches();
  impl->locate_base();
  return PotentialField(impl);
}

PotentialRole PotentialField::role() const { return impl_->role; }
int PotentialField::dim() const { return impl_->n; }
const ConvexDomain& PotentialField::domain() const { return impl_->dom; }
bool PotentialField::is_grid() const { return impl_->is_grid(); }

const GridSpec& PotentialField::grid_spec() const {
  if (!impl_->is_grid()) throw error("potential", "analytic field has no grid");
  return *impl_->gspec;
}

const Vec& PotentialField::grid_values() const {
  if (!impl_->is_grid()) throw error("potential", "analytic field has no grid values");
  return impl_->vals;
}

bool PotentialField::boundary_zero() const { return impl_->bzero; }

double PotentialField::value_at(const Vec& t) const {
  impl_->check_inside(t);
  return impl_->is_grid() ? impl_->g_value(t) : impl_->a_value(t);
}

Vec PotentialField::gradient_at(const Vec& t) const {
  impl_->check_inside(t);
  return impl_->is_grid() ? impl_->g_gradient(t) : impl_->a_gradient(t);
}

Mat PotentialField::hessian_at(const Vec& t) const {
  impl_->check_inside(t);
  Mat H = impl_->is_grid() ? impl_->g_hessian(t) : impl_->a_hessian(t);
  return 0.5 * (H + H.transpose());
}

const Vec& PotentialField::base_point() const { return impl_->base; }

HessianSample hessian_report_at(const PotentialField& u, const Vec& t) {
  HessianSample s;
  s.matrix = u.hessian_at(t);
  Eigen::SelfAdjointEigenSolver<Mat> es(s.matrix);
  s.min_eigenvalue = es.eigenvalues().minCoeff();
  s.positive_definite = s.min_eigenvalue > 1e-10 * (1.0 + s.matrix.trace());
  return s;
}

PotentialField transform_potential(const PotentialField& u, const ProjectiveMap& map) {
  if (u.role() != PotentialRole::PotentialU)
    throw precondition_error("potential", "projective transform requires a potential-u field");
  const int n = u.dim();
  if (map.dim() != n) throw precondition_error("potential", "map dimension mismatch");
  ConvexDomain image = u.domain().transformed(map);
  const ProjectiveMap S = map.inverse();
  const Vec beta = S.matrix().row(n).head(n);

  auto val = [u, S](const Vec& s) {
    const double rho = S.lambda(s);
    return rho * u.value_at(S.apply(s));
  };
  auto grd = [u, S, beta](const Vec& s) {
    const double rho = S.lambda(s);
    const Vec t = S.apply(s);
    const Mat J = S.chart_jacobian(s);
    return Vec(u.value_at(t) * beta + rho * (J.transpose() * u.gradient_at(t)));
  };
  auto hes = [u, S](const Vec& s) {
    const double rho = S.lambda(s);
    const Vec t = S.apply(s);
    const Mat J = S.chart_jacobian(s);
    return Mat(rho * (J.transpose() * u.hessian_at(t) * J));
  };
  return PotentialField::analytic(PotentialRole::PotentialU, std::move(image),
                                  std::move(val), std::move(grd), std::move(hes));
}

// ---------------------------------------------------------------------------
// Sublevel sets

bool SublevelSet::contains(const Vec& t) const {
  if (empty_) return false;
  if (!field_.domain().contains(t, 0.0)) return false;
  if (field_.is_grid() && !nodes_.empty()) {
    // Membership of the nearest node in the flooded component.
    const GridSpec& g = field_.grid_spec();
    auto [lo, hi] = field_.domain().bounding_box();
    int ci = static_cast<int>(std::lround((t[0] - lo[0]) / g.spacing(0)));
    int cj = field_.dim() == 2
                 ? static_cast<int>(std::lround((t[1] - lo[1]) / g.spacing(1)))
                 : 0;
    const int r = g.interior_rank_at(ci, cj);
    return r >= 0 && node_member_[r];
  }
  return field_.value_at(t) < cut_;
}

double SublevelSet::boundary_radius(const Vec& dir) const {
  if (empty_) return 0.0;
  Vec d = dir / dir.norm();
  const ConvexDomain& dom = field_.domain();
  double s_hi = dom.exit_distance(p_, d) * (1.0 - 1e-12);
  auto below = [&](double s) { return field_.value_at(p_ + s * d) < cut_; };
  if (below(s_hi)) return s_hi;  // set reaches the domain boundary along d
  double lo = 0.0, hi = s_hi;
  for (int it = 0; it < 200 && (hi - lo) > 1e-15 * (1.0 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (below(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SublevelSet sublevel_set(const PotentialField& u, double h, const Vec& p) {
  if (!(h > 0.0)) throw precondition_error("potential", "sublevel level must be positive");
  if (u.role() == PotentialRole::Scalar)
    throw precondition_error("potential", "sublevel sets need a potential-u or graph-f field");
  const Vec g = u.gradient_at(p);
  if (g.norm() > 1e-6 * (1.0 + u.domain().scale()))
    throw precondition_error("potential", "sublevel base point is not a local minimum");

  SublevelSet out(u);
  out.h_ = h;
  out.p_ = p;
  out.cut_ = u.role() == PotentialRole::PotentialU ? -1.0 / h : h;
  out.empty_ = !(u.value_at(p) < out.cut_);
  if (out.empty_) return out;

  if (u.is_grid()) {
    const GridSpec& gs = u.grid_spec();
    const Vec& vals = u.grid_values();
    out.node_member_.assign(gs.interior_count(), false);
    // flood fill over face-adjacent interior nodes from the node nearest p
    int start = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < gs.interior_count(); ++k) {
      if (!(vals[k] < out.cut_)) continue;
      const double d = (gs.node_point(gs.interior()[k]) - p).norm();
      if (d < best) {
        best = d;
        start = k;
      }
    }
    if (start < 0) {
      out.empty_ = true;
      return out;
    }
    std::deque<int> queue{start};
    out.node_member_[start] = true;
    while (!queue.empty()) {
      const int k = queue.front();
      queue.pop_front();
      out.nodes_.push_back(gs.interior()[k]);
      for (int a = 0; a < gs.dim(); ++a) {
        for (int s = 0; s < 2; ++s) {
          const int r = gs.arm(k, a, s).rank;
          if (r >= 0 && !out.node_member_[r] && vals[r] < out.cut_) {
            out.node_member_[r] = true;
            queue.push_back(r);
          }
        }
      }
    }
    std::sort(out.nodes_.begin(), out.nodes_.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Radial graph conversion

namespace {

struct RaySolver {
  PotentialField u;

  // Solve s + r*u(s*d) = 0 for s (the ray parameter whose image radius is r).
  double param_for_radius(const Vec& d, double r) const {
    if (r < 1e-300) return 0.0;
    const double s_exit = u.domain().exit_distance(Vec::Zero(d.size()), d);
    double hi = s_exit * (1.0 - 1e-12);
    auto g = [&](double s) { return s + r * u.value_at(s * d); };
    if (g(hi) < 0.0)
      throw error("potential", "radial-graph point outside chart image");
    double lo = 0.0;
    double s = std::min(hi, r * (-u.value_at(Vec::Zero(d.size()))));
    for (int it = 0; it < 100; ++it) {
      const double gs = g(s);
      if (gs >= 0.0)
        hi = s;
      else
        lo = s;
      if (std::abs(gs) <= 1e-15 * (1.0 + s)) break;
      const double dg = 1.0 + r * d.dot(u.gradient_at(s * d));
      double next = dg > 0.0 ? s - gs / dg : 0.5 * (lo + hi);
      if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - s) <= 1e-16 * (1.0 + s)) {
        s = next;
        break;
      }
      s = next;
    }
    return s;
  }

  Vec chart_point(const Vec& x) const {
    const int n = x.size();
    const double r = x.norm();
    if (r < 1e-300) return Vec::Zero(n);
    const Vec d = x / r;
    return param_for_radius(d, r) * d;
  }
};

}  // namespace

PotentialField radial_graph(const PotentialField& u, double chart_radius) {
  if (u.role() != PotentialRole::PotentialU)
    throw precondition_error("potential", "radial graph requires a potential-u field");
  const int n = u.dim();
  if (!u.domain().contains(Vec::Zero(n), 0.0))
    throw precondition_error("potential", "radial graph needs the chart origin inside the domain");

  // Image radius: infimum over directions of the boundary-probe radius.
  double qmin = std::numeric_limits<double>::infinity();
  const int dirs = n == 1 ? 2 : 64;
  for (int k = 0; k < dirs; ++k) {
    Vec d(n);
    if (n == 1)
      d[0] = k == 0 ? 1.0 : -1.0;
    else {
      const double a = 2.0 * M_PI * k / dirs;
      d << std::cos(a), std::sin(a);
    }
    const double se = u.domain().exit_distance(Vec::Zero(n), d);
    const double sp = se * (1.0 - 1e-9);
    const double uval = u.value_at(sp * d);
    if (uval < 0.0) qmin = std::min(qmin, sp / (-uval));
  }
  double radius = 0.999 * qmin;
  radius = chart_radius > 0.0 ? std::min(chart_radius, radius)
                              : std::min(kDefaultChartRadius, radius);

  RaySolver rs{u};
  auto val = [rs](const Vec& x) {
    const Vec t = rs.chart_point(x);
    return -1.0 / rs.u.value_at(t);
  };
  auto grd = [rs, n](const Vec& x) {
    const Vec t = rs.chart_point(x);
    const double uv = rs.u.value_at(t);
    const Vec ug = rs.u.gradient_at(t);
    const Mat M = -Mat::Identity(n, n) / uv + t * ug.transpose() / (uv * uv);
    return Vec(M.transpose().partialPivLu().solve(ug / (uv * uv)));
  };
  auto hes = [rs, n](const Vec& x) {
    const Vec t = rs.chart_point(x);
    const double uv = rs.u.value_at(t);
    const Vec ug = rs.u.gradient_at(t);
    const Mat uh = rs.u.hessian_at(t);
    const Mat M = -Mat::Identity(n, n) / uv + t * ug.transpose() / (uv * uv);
    const Mat Mt = M.transpose();
    auto luT = Mt.partialPivLu();
    const Vec F = luT.solve(ug / (uv * uv));
    // columns C_l = dq/dt_l - (dM^T/dt_l) F,  q = grad u / u^2
    Mat C(n, n);
    const double tF = t.dot(F);
    for (int l = 0; l < n; ++l) {
      const Vec He = uh.col(l);
      Vec dq = He / (uv * uv) - 2.0 * ug[l] * ug / (uv * uv * uv);
      Vec dMtF = (ug[l] / (uv * uv)) * F + (He * tF + ug * F[l]) / (uv * uv) -
                 (2.0 * ug[l] / (uv * uv * uv)) * ug * tF;
      C.col(l) = dq - dMtF;
    }
    const Mat H = luT.solve(C) * M.partialPivLu().inverse();
    return Mat(0.5 * (H + H.transpose()));
  };
  ConvexDomain image = n == 1 ? ConvexDomain::interval(-radius, radius)
                              : ConvexDomain::disk(Vec::Zero(2), radius);
  return PotentialField::analytic(PotentialRole::GraphF, std::move(image),
                                  std::move(val), std::move(grd), std::move(hes));
}

// ---------------------------------------------------------------------------
// Built-ins

namespace {

struct Callbacks {
  PotentialRole role;
  PotentialField::ValueFn val;
  PotentialField::GradFn grd;
  PotentialField::HessFn hes;
};

Callbacks ball_callbacks(int n) {
  return {PotentialRole::PotentialU,
          [](const Vec& t) { return -std::sqrt(std::max(0.0, 1.0 - t.squaredNorm())); },
          [](const Vec& t) {
            const double s = std::sqrt(std::max(1e-300, 1.0 - t.squaredNorm()));
            return Vec(t / s);
          },
          [n](const Vec& t) {
            const double s2 = std::max(1e-300, 1.0 - t.squaredNorm());
            const double s = std::sqrt(s2);
            return Mat(Mat::Identity(n, n) / s + t * t.transpose() / (s * s2));
          }};
}

Callbacks quadratic_callbacks(int n) {
  return {PotentialRole::PotentialU,
          [](const Vec& t) { return -1.0 + 0.25 * t.squaredNorm(); },
          [](const Vec& t) { return Vec(0.5 * t); },
          [n](const Vec&) { return Mat(0.5 * Mat::Identity(n, n)); }};
}

Callbacks hyperboloid_callbacks(int n) {
  return {PotentialRole::GraphF,
          [](const Vec& x) { return std::sqrt(1.0 + x.squaredNorm()); },
          [](const Vec& x) { return Vec(x / std::sqrt(1.0 + x.squaredNorm())); },
          [n](const Vec& x) {
            // (q2 I - x x^T) / q^3 assembled entrywise: the diagonal
            // 1 + sum_{k != i} x_k^2 avoids the catastrophic cancellation of
            // I/q - x x^T/q^3 at large |x| (radial eigenvalue ~ q^-3).
            const double q2 = 1.0 + x.squaredNorm();
            const double q = std::sqrt(q2);
            Mat p = Mat::Identity(n, n);
            for (int i = 0; i < n; ++i)
              for (int j = 0; j < n; ++j) {
                if (i == j) {
                  for (int k = 0; k < n; ++k)
                    if (k != i) p(i, i) += x[k] * x[k];
                } else {
                  p(i, j) = -x[i] * x[j];
                }
              }
            return Mat(p / (q * q2));
          }};
}

Callbacks polynomial_callbacks(int n, std::vector<double> coeffs) {
  if (coeffs.empty())
    throw precondition_error("potential", "polynomial builtin needs coefficients");
  auto p = [coeffs](double s) {
    double acc = 0.0;
    for (size_t m = coeffs.size(); m-- > 0;) acc = acc * s + coeffs[m];
    return acc;
  };
  auto dp = [coeffs](double s) {
    double acc = 0.0;
    for (size_t m = coeffs.size(); m-- > 1;) acc = acc * s + m * coeffs[m];
    return acc;
  };
  auto d2p = [coeffs](double s) {
    double acc = 0.0;
    for (size_t m = coeffs.size(); m-- > 2;) acc = acc * s + m * (m - 1) * coeffs[m];
    return acc;
  };
  return {PotentialRole::GraphF,
          [p](const Vec& x) { return p(x.squaredNorm()); },
          [dp](const Vec& x) { return Vec(2.0 * dp(x.squaredNorm()) * x); },
          [dp, d2p, n](const Vec& x) {
            const double s = x.squaredNorm();
            return Mat(2.0 * dp(s) * Mat::Identity(n, n) +
                       4.0 * d2p(s) * x * x.transpose());
          }};
}

ConvexDomain centered_ball(int n, double radius) {
  return n == 1 ? ConvexDomain::interval(-radius, radius)
                : ConvexDomain::disk(Vec::Zero(2), radius);
}

}  // namespace

PotentialField builtin_ball(int n) {
  Callbacks c = ball_callbacks(n);
  return PotentialField::analytic(c.role, ConvexDomain::unit_ball(n), c.val, c.grd, c.hes);
}

PotentialField builtin_quadratic(int n) {
  Callbacks c = quadratic_callbacks(n);
  return PotentialField::analytic(c.role, ConvexDomain::unit_ball(n), c.val, c.grd, c.hes);
}

PotentialField builtin_hyperboloid(int n, double radius) {
  Callbacks c = hyperboloid_callbacks(n);
  return PotentialField::analytic(c.role, centered_ball(n, radius), c.val, c.grd, c.hes);
}

PotentialField builtin_polynomial(int n, const std::vector<double>& coeffs, double radius) {
  Callbacks c = polynomial_callbacks(n, coeffs);
  return PotentialField::analytic(c.role, centered_ball(n, radius), c.val, c.grd, c.hes);
}

PotentialField make_builtin(const std::string& name, int n,
                            const std::vector<double>& coeffs,
                            std::optional<ConvexDomain> domain) {
  Callbacks c = [&] {
    if (name == "ball") return ball_callbacks(n);
    if (name == "quadratic") return quadratic_callbacks(n);
    if (name == "hyperboloid") return hyperboloid_callbacks(n);
    if (name == "polynomial")
      return polynomial_callbacks(n, coeffs.empty() ? std::vector<double>{0.0, 0.5} : coeffs);
    throw precondition_error("potential", "unknown builtin '" + name + "'");
  }();
  ConvexDomain dom = domain ? *domain : [&] {
    if (name == "ball" || name == "quadratic") return ConvexDomain::unit_ball(n);
    if (name == "hyperboloid")
      return centered_ball(n, coeffs.empty() ? 10.0 : coeffs[0]);
    return centered_ball(n, 1.0);
  }();
  if (dom.dim() != n) throw precondition_error("potential", "builtin domain dimension mismatch");
  return PotentialField::analytic(c.role, std::move(dom), c.val, c.grd, c.hes);
}

}  // namespace asphere
