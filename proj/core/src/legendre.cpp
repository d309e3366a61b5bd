#include "asphere/legendre.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "hull_util.hpp"

namespace asphere {

namespace {

void require_convex_samples(const PotentialField& f) {
  if (f.is_grid()) {
    const GridSpec& g = f.grid_spec();
    for (int k = 0; k < g.interior_count(); ++k) {
      const Vec p = g.node_point(g.interior()[k]);
      Eigen::SelfAdjointEigenSolver<Mat> es(f.hessian_at(p));
      if (es.eigenvalues().minCoeff() <= 0.0)
        throw error("legendre", "convexity failure at a grid sample (node " +
                                    std::to_string(k) + ")");
    }
    return;
  }
  const ConvexDomain& dom = f.domain();
  auto [lo, hi] = dom.bounding_box();
  const int n = f.dim();
  const int M = 11;
  const double margin = 1e-6 * dom.scale();
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < (n == 2 ? M : 1); ++j) {
      Vec p(n);
      p[0] = lo[0] + (hi[0] - lo[0]) * (i + 0.5) / M;
      if (n == 2) p[1] = lo[1] + (hi[1] - lo[1]) * (j + 0.5) / M;
      if (!dom.contains(p, margin)) continue;
      Eigen::SelfAdjointEigenSolver<Mat> es(f.hessian_at(p));
      if (es.eigenvalues().minCoeff() <= 0.0)
        throw error("legendre", "convexity failure at an interior sample");
    }
  }
}

Vec invert_gradient(const PotentialField& f, const Vec& y) {
  const ConvexDomain& dom = f.domain();
  const double margin = 1e-9 * dom.scale();
  Vec x = dom.contains(y, margin) ? y : f.base_point();
  const double ref = 1.0 + y.norm();
  Vec r = f.gradient_at(x) - y;
  for (int it = 0; it < 50; ++it) {
    const Vec step = -f.hessian_at(x).ldlt().solve(r);
    // Step-based exit: the gradient residual alone is amplified in x by the
    // inverse Hessian along flat directions; the Newton step measures the
    // remaining x error directly. Apply the final correction before leaving.
    if (step.norm() <= 1e-13 * (1.0 + x.norm())) {
      const Vec polished = x + step;
      return dom.contains(polished, margin) ? polished : x;
    }
    double t = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Vec cand = x + t * step;
      if (dom.contains(cand, margin)) {
        const Vec rc = f.gradient_at(cand) - y;
        if (rc.norm() < r.norm()) {
          x = cand;
          r = rc;
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  if (r.norm() <= 1e-12 * ref) {
    // Line search stalled at the residual floor; one last full step still
    // removes the Hessian-amplified x error.
    const Vec step = -f.hessian_at(x).ldlt().solve(r);
    const Vec polished = x + step;
    return dom.contains(polished, margin) ? polished : x;
  }
  throw error("legendre", "gradient inversion did not converge (residual " +
                              std::to_string(r.norm()) + ")");
}

ConvexDomain dual_domain_analytic(const PotentialField& f) {
  const ConvexDomain& dom = f.domain();
  const int n = f.dim();
  if (n == 1) {
    auto [lo, hi] = dom.bounding_box();
    const double inset = 1e-6 * (hi[0] - lo[0]);
    const double ylo = f.gradient_at(vec1(lo[0] + inset))[0];
    const double yhi = f.gradient_at(vec1(hi[0] - inset))[0];
    if (!(yhi > ylo)) throw error("legendre", "gradient image degenerate");
    return ConvexDomain::interval(ylo, yhi);
  }
  const Vec c = dom.centroid();
  std::vector<Vec> pushed;
  for (const Vec& b : dom.boundary_points(128)) {
    const Vec p = c + (1.0 - 1e-6) * (b - c);
    pushed.push_back(f.gradient_at(p));
  }
  auto hull = detail::convex_hull(std::move(pushed));
  if (hull.size() < 3) throw error("legendre", "gradient image degenerate");
  return ConvexDomain::polygon(detail::shrink_about_centroid(hull, 1.0 - 1e-6));
}

PotentialField dual_analytic(const PotentialField& f) {
  ConvexDomain ydom = dual_domain_analytic(f);
  auto val = [f](const Vec& y) {
    const Vec x = invert_gradient(f, y);
    return y.dot(x) - f.value_at(x);
  };
  auto grd = [f](const Vec& y) { return invert_gradient(f, y); };
  auto hes = [f](const Vec& y) {
    const Vec x = invert_gradient(f, y);
    return Mat(f.hessian_at(x).inverse());
  };
  return PotentialField::analytic(PotentialRole::GraphF, std::move(ydom),
                                  std::move(val), std::move(grd), std::move(hes));
}

PotentialField dual_grid(const PotentialField& f) {
  const GridSpec& g = f.grid_spec();
  const int n = f.dim();
  const int m = g.interior_count();
  std::vector<Vec> pushed(m);
  Vec pv(m);
  for (int k = 0; k < m; ++k) {
    const Vec x = g.node_point(g.interior()[k]);
    const Vec y = f.gradient_at(x);
    pushed[k] = y;
    pv[k] = x.dot(y) - f.value_at(x);
  }

  ConvexDomain ydom = [&] {
    if (n == 1) {
      double lo = pushed[0][0], hi = pushed[0][0];
      for (const Vec& y : pushed) {
        lo = std::min(lo, y[0]);
        hi = std::max(hi, y[0]);
      }
      const double inset = 1e-9 * (hi - lo);
      return ConvexDomain::interval(lo + inset, hi - inset);
    }
    auto hull = detail::convex_hull(pushed);
    if (hull.size() < 3) throw error("legendre", "gradient image degenerate");
    return ConvexDomain::polygon(detail::shrink_about_centroid(hull, 1.0 - 1e-6));
  }();

  GridSpec dual_spec(ydom, g.nodes_per_axis());

  // Bucket the pushed points on the dual lattice for near-neighbor lookups.
  auto [lo, hi] = ydom.bounding_box();
  const int N = dual_spec.nodes_per_axis();
  std::vector<std::vector<int>> buckets(static_cast<size_t>(N) * (n == 2 ? N : 1));
  auto bucket_of = [&](const Vec& y) {
    int bi = std::clamp(
        static_cast<int>(std::floor((y[0] - lo[0]) / dual_spec.spacing(0))), 0, N - 1);
    int bj = n == 2 ? std::clamp(static_cast<int>(std::floor(
                                     (y[1] - lo[1]) / dual_spec.spacing(1))),
                                 0, N - 1)
                    : 0;
    return n == 1 ? bi : bi * N + bj;
  };
  for (int k = 0; k < m; ++k) buckets[bucket_of(pushed[k])].push_back(k);

  Vec vals(dual_spec.interior_count());
  for (int k = 0; k < dual_spec.interior_count(); ++k) {
    const Vec y = dual_spec.node_point(dual_spec.interior()[k]);
    // collect candidates ring by ring until at least 4, then one spare ring
    std::vector<int> cand;
    const int ci = bucket_of(y) / (n == 1 ? 1 : N);
    const int cj = n == 1 ? 0 : bucket_of(y) % N;
    int ring = 0;
    int settled_at = -1;
    for (; ring < N && (settled_at < 0 || ring <= settled_at + 1); ++ring) {
      for (int di = -ring; di <= ring; ++di) {
        for (int dj = -ring; dj <= ring; ++dj) {
          if (std::max(std::abs(di), std::abs(dj)) != ring) continue;
          if (n == 1 && dj != 0) continue;
          const int bi = ci + di, bj = cj + dj;
          if (bi < 0 || bi >= N || bj < 0 || (n == 2 && bj >= N)) continue;
          for (int idx : buckets[n == 1 ? bi : bi * N + bj]) cand.push_back(idx);
        }
      }
      if (settled_at < 0 && static_cast<int>(cand.size()) >= 4) settled_at = ring;
    }
    if (cand.empty()) throw error("legendre", "dual resampling found no support points");
    std::sort(cand.begin(), cand.end(), [&](int a, int b) {
      return (pushed[a] - y).norm() < (pushed[b] - y).norm();
    });
    const int take = std::min<int>(4, cand.size());
    const double d0 = (pushed[cand[0]] - y).norm();
    if (d0 < 1e-14) {
      vals[k] = pv[cand[0]];
      continue;
    }
    // Each pushed point carries its exact dual gradient (the source node x),
    // so weight first-order extrapolations rather than bare values.
    double wsum = 0.0, acc = 0.0;
    for (int c = 0; c < take; ++c) {
      const int idx = cand[c];
      const double d = (pushed[idx] - y).norm();
      const double w = 1.0 / d;
      const Vec x_src = g.node_point(g.interior()[idx]);
      wsum += w;
      acc += w * (pv[idx] + x_src.dot(y - pushed[idx]));
    }
    vals[k] = acc / wsum;
  }
  return PotentialField::grid(PotentialRole::GraphF, std::move(dual_spec),
                              std::move(vals), false);
}

}  // namespace

Vec LegendrePair::forward(const Vec& x) const { return f_.gradient_at(x); }

Vec LegendrePair::inverse(const Vec& y) const { return invert_gradient(f_, y); }

LegendrePair legendre_transform(const PotentialField& f) {
  require_convex_samples(f);
  PotentialField v = f.is_grid() ? dual_grid(f) : dual_analytic(f);
  return LegendrePair(f, std::move(v));
}

Vec gradient_identity_defect(const LegendrePair& pair, const Vec& x) {
  const Vec y = pair.forward(x);
  const Vec xv = pair.dual().gradient_at(y);  // independent path: dual's own gradient
  return pair.primal().hessian_at(x) * (xv - x);
}

double duality_gap(const LegendrePair& pair, const Vec& x) {
  const PotentialField& f = pair.primal();
  const int n = f.dim();
  const Vec origin = Vec::Zero(n);
  if (!f.domain().contains(origin, 0.0))
    throw precondition_error("legendre", "duality gap needs the minimum at the origin");
  if (f.gradient_at(origin).norm() > 1e-8 * (1.0 + f.domain().scale()))
    throw precondition_error("legendre", "duality gap needs the minimum at the origin");
  const Vec y = pair.forward(x);
  if (pair.dual().domain().contains(y, 0.0))
    return pair.dual().value_at(y) + f.value_at(x);
  // outside the inscribed dual chart: v + f collapses to x.y by the identity
  return x.dot(y);
}

}  // namespace asphere
