#include "asphere/harness.hpp"

#include "asphere/domain.hpp"
#include "asphere/grid.hpp"
#include "asphere/invariants.hpp"
#include "asphere/legendre.hpp"
#include "asphere/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace asphere {

namespace {

bool positive_definite(const Mat& h) {
  if (h.rows() == 1) return h(0, 0) > 0.0;
  return h(0, 0) > 0.0 && h.determinant() > 0.0;
}

// Sample of the gradient-estimate quantities without the height factor Q.
// For GraphF fields everything is read off at the chart point directly; for
// PotentialU fields the same scalars are expressed through the radial graph
// x = -t/u, f = -1/u:
//   c     = t.grad u - u          ( = -1/v, positive for negative convex u)
//   det f = det(u_ij) (-u)^{n+2} / c^{n+2}
//   ratio^2 = (det u_ij)^{1/(n+2)} u^2 (t^T u_ij t) / c^2.
GradEstimateSample base_sample(const PotentialField& field, const Vec& point) {
  const int n = field.dim();
  GradEstimateSample s;
  if (field.role() == PotentialRole::GraphF) {
    const double f = field.value_at(point);
    const Vec g = field.gradient_at(point);
    const Mat H = field.hessian_at(point);
    if (!positive_definite(H))
      throw error("harness", "graph Hessian is not positive definite at the sample");
    const double v = point.dot(g) - f;
    if (!(v < -1e-300))
      throw error("harness", "transversality failure (Legendre value x.grad f - f vanishes)");
    const double det = n == 1 ? H(0, 0) : H.determinant();
    const double root = std::pow(det, 1.0 / (n + 2));
    s.x = point;
    s.f = f;
    s.v = v;
    s.w = -1.0 / v;
    s.psi = root / (-v);
    s.grad_norm_ratio = std::sqrt(root * point.dot(H * point)) / (-v);
    return s;
  }
  if (field.role() == PotentialRole::PotentialU) {
    const double u = field.value_at(point);
    if (!(u < 0.0)) throw error("harness", "potential is not negative at the sample");
    const Vec g = field.gradient_at(point);
    const Mat H = field.hessian_at(point);
    if (!positive_definite(H))
      throw error("harness", "potential Hessian is not positive definite at the sample");
    const double c = point.dot(g) - u;
    if (!(c > 1e-300))
      throw error("harness", "transversality failure (t.grad u - u vanishes)");
    const double det = n == 1 ? H(0, 0) : H.determinant();
    const double root = std::pow(det, 1.0 / (n + 2));
    s.x = -point / u;
    s.f = -1.0 / u;
    s.v = -1.0 / c;
    s.w = c;
    s.psi = (-u) * root;
    s.grad_norm_ratio = std::sqrt(root * point.dot(H * point)) * (-u) / c;
    return s;
  }
  throw precondition_error("harness",
                           "gradient estimate needs a potential-u or graph-f field");
}

struct LatticeScan {
  double sup = 0.0;
  Vec argmax;
  double argmax_height = 0.0;
  int kept = 0;       // samples in the sublevel set past the rim band
  int banded = 0;     // samples excluded by the rim band
  int failed = 0;     // samples where the local quantities degenerate
};

LatticeScan scan_lattice(const PotentialField& field, const SublevelSet& set,
                         double h, const Vec& lo, const Vec& hi, int nodes) {
  const int n = field.dim();
  LatticeScan out;
  out.argmax = Vec::Zero(n);
  double spacing = 0.0;
  for (int a = 0; a < n; ++a) spacing = std::max(spacing, (hi[a] - lo[a]) / (nodes - 1));
  double banded_sup = 0.0;
  Vec banded_arg = Vec::Zero(n);
  double banded_height = 0.0;
  const int ny = n == 2 ? nodes : 1;
  for (int i = 0; i < nodes; ++i) {
    for (int j = 0; j < ny; ++j) {
      Vec t(n);
      t[0] = lo[0] + (hi[0] - lo[0]) * i / (nodes - 1);
      if (n == 2) t[1] = lo[1] + (hi[1] - lo[1]) * j / (nodes - 1);
      if (!set.contains(t)) continue;
      GradEstimateSample s;
      try {
        s = base_sample(field, t);
      } catch (const std::runtime_error&) {
        ++out.failed;
        continue;
      }
      if (!(s.f < h)) continue;
      const double q = s.grad_norm_ratio * std::sqrt(h - s.f);
      if (h - s.f < 10.0 * spacing) {
        ++out.banded;
        if (q > banded_sup) {
          banded_sup = q;
          banded_arg = t;
          banded_height = s.f;
        }
        continue;
      }
      ++out.kept;
      if (q > out.sup) {
        out.sup = q;
        out.argmax = t;
        out.argmax_height = s.f;
      }
    }
  }
  if (out.kept == 0 && out.banded > 0) {
    // The rim band swallowed the whole set (h barely above the minimum);
    // fall back to the unfiltered sup, which is tiny there anyway.
    out.sup = banded_sup;
    out.argmax = banded_arg;
    out.argmax_height = banded_height;
    out.kept = out.banded;
    out.banded = -out.banded;  // signals the fallback to the caller
  }
  return out;
}

double level_spacing(const ConvexDomain& dom, int nodes) {
  GridSpec g(dom, nodes);
  double s = 0.0;
  for (int a = 0; a < dom.dim(); ++a) s = std::max(s, g.spacing(a));
  return s;
}

}  // namespace

bool StudyReport::passed() const {
  for (const auto& c : criteria)
    if (!c.passed) return false;
  return true;
}

double gradient_ratio(const PotentialField& field, const Vec& point) {
  return base_sample(field, point).grad_norm_ratio;
}

GradEstimateSample gradient_sample(const PotentialField& field, const Vec& point,
                                   double h) {
  if (!std::isfinite(h)) throw precondition_error("harness", "height must be finite");
  GradEstimateSample s = base_sample(field, point);
  if (!(s.f < h))
    throw error("harness", "sample lies outside the height-" + format_full(h) +
                               " sublevel set (f = " + format_full(s.f) + ")");
  s.Q = s.grad_norm_ratio * std::sqrt(h - s.f);
  return s;
}

StudyReport gradient_estimate_scan(const PotentialField& field, double h,
                                   int nodes_per_axis) {
  if (field.role() == PotentialRole::Scalar)
    throw precondition_error("harness",
                             "gradient estimate needs a potential-u or graph-f field");
  if (!(h > 0.0)) throw precondition_error("harness", "height must be positive");
  if (nodes_per_axis < 9)
    throw precondition_error("harness", "scan needs at least 9 nodes per axis");

  const int n = field.dim();
  const Vec p = field.base_point();
  SublevelSet set = sublevel_set(field, h, p);
  if (set.empty())
    throw error("harness",
                "sublevel set is empty at height h = " + format_full(h));

  // Axis-aligned cover of the (convex) sublevel region from boundary probes.
  Vec lo = p, hi = p;
  const int dirs = n == 1 ? 2 : 64;
  for (int k = 0; k < dirs; ++k) {
    Vec d(n);
    if (n == 1)
      d[0] = k == 0 ? 1.0 : -1.0;
    else {
      const double a = 2.0 * M_PI * k / dirs;
      d << std::cos(a), std::sin(a);
    }
    const Vec q = p + set.boundary_radius(d) * d;
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }

  const LatticeScan coarse = scan_lattice(field, set, h, lo, hi, nodes_per_axis);
  const LatticeScan fine = scan_lattice(field, set, h, lo, hi, 2 * nodes_per_axis - 1);
  if (fine.kept == 0)
    throw error("harness",
                "no usable samples in the sublevel set at height h = " + format_full(h));

  const double change =
      std::abs(fine.sup - coarse.sup) / std::max(fine.sup, 1e-8);

  StudyReport rep;
  rep.kind = "gradient-estimate";
  rep.sweep = {h};
  rep.measured = {fine.sup};
  rep.fitted["supQ"] = fine.sup;
  rep.fitted["supQ_coarse"] = coarse.sup;
  rep.fitted["refinement_change"] = change;
  rep.fitted["argmax_height"] = fine.argmax_height;
  rep.fitted["samples"] = fine.kept;
  for (int a = 0; a < n; ++a)
    rep.fitted["argmax_x" + std::to_string(a)] = fine.argmax[a];
  rep.criteria.push_back({"sublevel samples nonempty", fine.kept > 0,
                          static_cast<double>(fine.kept)});
  rep.criteria.push_back({"sup Q finite", std::isfinite(fine.sup), fine.sup});
  rep.criteria.push_back({"refinement x2 changes sup Q by < 20%", change < 0.2, change});
  if (fine.banded < 0)
    rep.notes.push_back(
        "rim band (h - f < 10 spacings) covered the whole sublevel set; "
        "sup taken without the exclusion");
  if (fine.failed > 0)
    rep.notes.push_back(std::to_string(fine.failed) +
                        " lattice samples skipped (degenerate local data)");
  return rep;
}

StudyReport divergence_study(const PotentialField& field, const Vec& direction,
                             int k_max, double rtol) {
  if (field.role() == PotentialRole::Scalar)
    throw precondition_error("harness",
                             "divergence study needs a potential-u or graph-f field");
  if (direction.size() != field.dim() || direction.norm() < 1e-300)
    throw precondition_error("harness", "ray direction must be a nonzero chart vector");
  if (k_max < 2) throw precondition_error("harness", "need at least two decades");
  if (!(rtol > 0.0)) throw precondition_error("harness", "tolerance must be positive");

  const Vec d = direction / direction.norm();
  StudyReport rep;
  rep.kind = "divergence";
  std::vector<double> lengths;

  if (field.role() == PotentialRole::GraphF) {
    const Vec origin = Vec::Zero(field.dim());
    if (!field.domain().contains(origin))
      throw precondition_error("harness", "graph chart must contain the origin");
    const double reach = field.domain().exit_distance(origin, d);
    if (std::pow(10.0, k_max) >= reach)
      throw error("harness", "ray leaves the chart before decade " +
                                 std::to_string(k_max) + " (available radius = " +
                                 format_full(reach) + ")");
    double len = 0.0, prev = 0.0;
    for (int k = 0; k <= k_max; ++k) {
      const double z = std::pow(10.0, k);
      len += geodesic_length(field, d, prev, z, rtol);
      prev = z;
      rep.sweep.push_back(k);
      lengths.push_back(len);
    }
  } else {
    const Vec p = field.base_point();
    const double reach = field.domain().exit_distance(p, d);
    double len = 0.0;
    Vec prev = p;
    for (int k = 1; k <= k_max; ++k) {
      const Vec q = p + (1.0 - std::pow(10.0, -k)) * reach * d;
      len += metric_path_length(MetricKind::AffineRadial, field, prev, q, rtol);
      prev = q;
      rep.sweep.push_back(k);
      lengths.push_back(len);
    }
  }

  rep.measured = lengths;
  double min_inc = std::numeric_limits<double>::infinity();
  bool increasing = true;
  for (size_t i = 1; i < lengths.size(); ++i) {
    const double inc = lengths[i] - lengths[i - 1];
    increasing = increasing && inc > 0.0;
    min_inc = std::min(min_inc, inc);
  }
  rep.fitted["final_length"] = lengths.back();
  rep.fitted["min_increment"] = min_inc;
  rep.fitted["last_increment"] =
      lengths.size() > 1 ? lengths.back() - lengths[lengths.size() - 2] : 0.0;
  rep.criteria.push_back({"lengths strictly increasing", increasing, min_inc});
  rep.criteria.push_back({"per-decade increments >= 0.5", min_inc >= 0.5, min_inc});
  return rep;
}

StudyReport convergence_order(const std::string& problem,
                              const std::vector<int>& levels, double min_order) {
  if (levels.size() < 3)
    throw precondition_error("harness", "need at least three grid levels");
  for (size_t i = 0; i < levels.size(); ++i)
    if (levels[i] < 9 || (i > 0 && levels[i] <= levels[i - 1]))
      throw precondition_error("harness", "grid levels must be increasing and >= 9");

  ConvexDomain dom = ConvexDomain::unit_ball(2);
  bool closed_form = true;
  if (problem == "interval")
    dom = ConvexDomain::unit_ball(1);
  else if (problem == "disk")
    dom = ConvexDomain::unit_ball(2);
  else if (problem == "ellipse")
    dom = ConvexDomain::ellipse(vec2(0.0, 0.0), 1.2, 0.7, 0.3);
  else if (problem == "square") {
    dom = ConvexDomain::square(1.0);
    closed_form = false;
  } else {
    throw precondition_error(
        "harness", "unknown convergence problem '" + problem +
                       "' (expected interval, disk, ellipse, or square)");
  }

  StudyReport rep;
  rep.kind = "convergence";
  std::vector<double> errors, spacings;

  // Square has no closed form: measure against a solve at twice the finest
  // resolution, over the same interior clearance the closed forms use.
  PotentialField reference = builtin_ball(dom.dim());
  if (!closed_form) {
    GridSpec gref(dom, 2 * (levels.back() - 1) + 1);
    reference = solve_affine_sphere(dom, gref).first;
    rep.notes.push_back("reference = solve at " +
                        std::to_string(2 * (levels.back() - 1) + 1) +
                        " nodes per axis (no closed form)");
  }
  const auto [blo, bhi] = dom.bounding_box();
  const double clearance = 0.15 * 0.5 * (bhi - blo).minCoeff();

  for (int N : levels) {
    GridSpec g(dom, N);
    auto [u, r] = solve_affine_sphere(dom, g);
    double err;
    if (closed_form) {
      err = r.reference_error;
    } else {
      err = 0.0;
      for (int k = 0; k < g.interior_count(); ++k) {
        const Vec t = g.node_point(g.interior()[k]);
        if (dom.boundary_distance(t) < clearance) continue;
        err = std::max(err, std::abs(u.grid_values()[k] - reference.value_at(t)));
      }
    }
    errors.push_back(err);
    spacings.push_back(level_spacing(dom, N));
    rep.sweep.push_back(N);
  }
  rep.measured = errors;
  const double max_err = *std::max_element(errors.begin(), errors.end());
  rep.fitted["max_error"] = max_err;

  if (max_err <= 1e-12) {
    // The stencils reproduce the solution to rounding on every level; a
    // Richardson fit on noise would be meaningless.
    rep.fitted["exact"] = 1.0;
    rep.notes.push_back("discretization exact for this problem; order reported as exact");
    rep.criteria.push_back({"order exact (all errors <= 1e-12)", true, max_err});
    return rep;
  }

  bool monotone = true;
  for (size_t i = 1; i < errors.size(); ++i)
    monotone = monotone && errors[i] < errors[i - 1];

  // Least-squares slope of log error against log spacing.
  double sh = 0.0, se = 0.0, shh = 0.0, she = 0.0;
  for (size_t i = 0; i < errors.size(); ++i) {
    const double lh = std::log(spacings[i]);
    const double le = std::log(std::max(errors[i], 1e-16));
    sh += lh;
    se += le;
    shh += lh * lh;
    she += lh * le;
  }
  const double m = static_cast<double>(errors.size());
  const double order = (she - sh * se / m) / (shh - sh * sh / m);
  rep.fitted["order"] = order;
  rep.criteria.push_back({"error sequence monotone decreasing", monotone,
                          errors.back() / errors.front()});
  rep.criteria.push_back(
      {"fitted order >= " + format_full(min_order), order >= min_order, order});
  return rep;
}

StudyReport equivariance_suite(const PotentialField& u,
                               const std::vector<ProjectiveMap>& maps,
                               std::uint64_t seed, int samples_per_map, double tol) {
  if (u.role() != PotentialRole::PotentialU)
    throw precondition_error("harness", "equivariance suite needs a potential-u field");
  if (maps.empty()) throw precondition_error("harness", "need at least one map");
  if (samples_per_map < 1)
    throw precondition_error("harness", "need at least one sample per map");
  if (!(tol > 0.0)) throw precondition_error("harness", "tolerance must be positive");

  const int n = u.dim();
  const ConvexDomain& dom = u.domain();
  const auto [blo, bhi] = dom.bounding_box();
  const double margin = 0.05 * dom.scale();

  StudyReport rep;
  rep.kind = "equivariance";
  rep.seed = seed;
  double dev_res = 0.0, dev_nor = 0.0, dev_met = 0.0;
  int skipped = 0;

  for (size_t mi = 0; mi < maps.size(); ++mi) {
    const ProjectiveMap& map = maps[mi];
    const Mat& L = map.matrix();
    if (std::abs(std::abs(L.determinant()) - 1.0) > 1e-9)
      throw precondition_error("harness", "maps must be normalized to |det| = 1");
    if (L.determinant() < 0.0)
      throw precondition_error("harness", "maps must preserve orientation");

    double dmap = 0.0;
    try {
      const PotentialField ut = transform_potential(u, map);
      const Mat LinvT = L.inverse().transpose();
      std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * (mi + 1));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      int taken = 0;
      while (taken < samples_per_map) {
        Vec t(n);
        for (int a = 0; a < n; ++a) t[a] = blo[a] + (bhi[a] - blo[a]) * unif(rng);
        if (!dom.contains(t, margin)) continue;
        ++taken;
        const Vec s = map.apply(t);

        const double dr =
            std::abs(affine_sphere_residual(ut, s) - affine_sphere_residual(u, t));
        dev_res = std::max(dev_res, dr);
        dmap = std::max(dmap, dr);

        const ConormalSample base = radial_conormals_at(u, t);
        const ConormalSample image = radial_conormals_at(ut, s);
        const double dn = std::max(
            (image.nu - LinvT * base.nu).norm() / (1.0 + base.nu.norm()),
            (image.mu - LinvT * base.mu).norm() / (1.0 + base.mu.norm()));
        dev_nor = std::max(dev_nor, dn);
        dmap = std::max(dmap, dn);

        const Mat J = map.chart_jacobian(t);
        for (MetricKind kind : {MetricKind::Centroaffine, MetricKind::AffineRadial}) {
          const Mat G = metric_at(kind, u, t);
          const Mat Gt = metric_at(kind, ut, s);
          const double dg = (J.transpose() * Gt * J - G).norm() / (1.0 + G.norm());
          dev_met = std::max(dev_met, dg);
          dmap = std::max(dmap, dg);
        }
      }
    } catch (const std::runtime_error& e) {
      ++skipped;
      rep.notes.push_back("map " + std::to_string(mi) + " skipped: " + e.what());
      rep.sweep.push_back(static_cast<double>(mi));
      rep.measured.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    rep.sweep.push_back(static_cast<double>(mi));
    rep.measured.push_back(dmap);
  }

  if (skipped == static_cast<int>(maps.size()))
    throw error("harness", "every map left the chart; nothing was checked");

  rep.fitted["max_residual_deviation"] = dev_res;
  rep.fitted["max_conormal_deviation"] = dev_nor;
  rep.fitted["max_metric_deviation"] = dev_met;
  rep.fitted["maps_checked"] = static_cast<double>(maps.size() - skipped);
  rep.fitted["maps_skipped"] = static_cast<double>(skipped);
  rep.criteria.push_back({"residual invariance within tolerance", dev_res <= tol, dev_res});
  rep.criteria.push_back({"conormal transformation law within tolerance", dev_nor <= tol, dev_nor});
  rep.criteria.push_back({"metric pullback law within tolerance", dev_met <= tol, dev_met});
  return rep;
}

std::vector<ProjectiveMap> random_affine_maps(int dim, int count, std::uint64_t seed) {
  if (dim != 1 && dim != 2)
    throw precondition_error("harness", "dimension must be 1 or 2");
  if (count < 1) throw precondition_error("harness", "need a positive count");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<ProjectiveMap> maps;
  maps.reserve(count);
  while (static_cast<int>(maps.size()) < count) {
    Mat M = Mat::Identity(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) M(i, j) += 0.25 * unif(rng);
    Vec b(dim);
    for (int i = 0; i < dim; ++i) b[i] = 0.2 * unif(rng);
    if (M.determinant() < 0.4) continue;  // keep maps well-conditioned
    maps.push_back(ProjectiveMap::affine(M, b));
  }
  return maps;
}

std::vector<PotentialField> legendre_test_fields() {
  return {builtin_hyperboloid(1, 10.0), builtin_hyperboloid(2, 10.0),
          builtin_polynomial(1, {1.0, 0.5}, 1.5),
          builtin_polynomial(2, {1.0, 0.5, 0.25}, 1.2),
          builtin_polynomial(2, {0.5, 1.0, 0.0, 0.125}, 1.0)};
}

StudyReport legendre_suite(const std::vector<PotentialField>& fields,
                           std::uint64_t seed, int samples_per_field, double tol) {
  if (fields.empty())
    throw precondition_error("harness", "legendre suite needs at least one field");
  if (samples_per_field < 1)
    throw precondition_error("harness", "samples_per_field must be positive");
  if (!(tol > 0.0)) throw precondition_error("harness", "tolerance must be positive");

  StudyReport rep;
  rep.kind = "legendre";
  rep.seed = seed;

  double max_inv = 0.0, max_def = 0.0;
  double min_gap = std::numeric_limits<double>::infinity();

  for (size_t fi = 0; fi < fields.size(); ++fi) {
    const PotentialField& f = fields[fi];
    const LegendrePair pair = legendre_transform(f);
    const ConvexDomain& dom = f.domain();
    const int n = f.dim();
    const auto [blo, bhi] = dom.bounding_box();
    const double margin = 0.05 * dom.scale();

    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * (fi + 1));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    double field_dev = 0.0;
    int taken = 0;
    while (taken < samples_per_field) {
      Vec x(n);
      for (int a = 0; a < n; ++a) x[a] = blo[a] + (bhi[a] - blo[a]) * unif(rng);
      if (!dom.contains(x, margin)) continue;
      ++taken;

      const Vec y = pair.forward(x);
      const double inv = (pair.inverse(y) - x).norm();
      const double def =
          gradient_identity_defect(pair, x).cwiseAbs().maxCoeff();
      const double gap = duality_gap(pair, x);

      max_inv = std::max(max_inv, inv);
      max_def = std::max(max_def, def);
      min_gap = std::min(min_gap, gap);
      field_dev = std::max({field_dev, inv, def, std::max(0.0, -gap)});
    }
    rep.sweep.push_back(static_cast<double>(fi));
    rep.measured.push_back(field_dev);
  }

  rep.fitted["max_involution_error"] = max_inv;
  rep.fitted["max_identity_defect"] = max_def;
  rep.fitted["min_duality_gap"] = min_gap;
  rep.fitted["samples_total"] =
      static_cast<double>(samples_per_field) * static_cast<double>(fields.size());
  rep.criteria.push_back({"involution round trip within tolerance", max_inv <= tol, max_inv});
  rep.criteria.push_back({"gradient identity defect within tolerance", max_def <= tol, max_def});
  rep.criteria.push_back({"duality gap nonnegative (>= -1e-12)", min_gap >= -1e-12, min_gap});
  return rep;
}

}  // namespace asphere
