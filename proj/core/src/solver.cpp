#include "asphere/solver.hpp"

#include "stencil_util.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

namespace asphere {
namespace {

using Trip = Eigen::Triplet<double>;
using Sparse = Eigen::SparseMatrix<double>;

// The solver works on the square variable w = u^2 (u = -sqrt(w)): w is
// smooth up to the boundary where u itself has infinite slope, it vanishes
// exactly at the cut points, and on balls the solution w is a plain
// quadratic, which the unequal-arm stencils reproduce exactly. With
//   K = D^2 w - (grad w)(grad w)^T / (2w)
// one has D^2 u = -K / (2 sqrt(w)), and the log-form residual of
// det(D^2 u) = (-1/u)^{s(n+2)} becomes
//   G = log det(-K) + c_w log w - n log 2,   c_w = (s(n+2) - n)/2.
// s = 1 is the target equation; s < 1 are continuation stages.

struct NodeEval {
  Mat P;           // multiplier of tr(P dS) in the linearization, S = -K
  Vec gw;          // S-W gradient of w
  double denom;    // the (smoothed) w used inside K
  double ddenom;   // d denom / d w_k
  double wfac;     // d (c_w log w-term) / d w_k, without the c_w factor
};

struct Evaluation {
  Vec G;
  std::vector<NodeEval> nodes;
  bool negativity = true;  // w > 0 everywhere
  bool convexity = true;   // S = -K positive definite everywhere
  bool valid() const { return negativity && convexity; }
  double res() const { return G.size() ? G.cwiseAbs().maxCoeff() : 0.0; }
};

class NewtonSolver {
 public:
  NewtonSolver(const GridSpec& grid, const SolverConfig& cfg)
      : g_(grid), cfg_(cfg), n_(grid.dim()), m_(grid.interior_count()) {}

  // eps <= 0: hard evaluation (requires w > 0, -K PD for validity);
  // eps > 0: eigenvalue/softplus smoothed evaluation, finite for any w.
  Evaluation evaluate(const Vec& w, double cw, double eps) const {
    Evaluation ev;
    ev.G.resize(m_);
    ev.nodes.resize(m_);
    for (int k = 0; k < m_; ++k) {
      const auto [i, j] = g_.multi_index(g_.interior()[k]);
      NodeEval& ne = ev.nodes[k];
      ne.gw = Vec::Zero(n_);
      Mat Hw = Mat::Zero(n_, n_);
      for (int a = 0; a < n_; ++a) {
        const auto& ap = g_.arm(k, a, 1);
        const auto& am = g_.arm(k, a, 0);
        const double wp = ap.rank >= 0 ? w[ap.rank] : 0.0;
        const double wm = am.rank >= 0 ? w[am.rank] : 0.0;
        detail::Axis1D st(ap.dist, am.dist);
        Hw(a, a) = st.d2_p * wp + st.d2_m * wm + st.d2_c * w[k];
        ne.gw[a] = st.d1_p * wp + st.d1_m * wm + st.d1_c * w[k];
      }
      if (n_ == 2) Hw(0, 1) = Hw(1, 0) = cross_value(i, j, w, w[k]);

      double logw;
      if (eps > 0.0) {
        const double r = std::sqrt(w[k] * w[k] + 4.0 * eps * eps);
        ne.denom = 0.5 * (w[k] + r);
        ne.ddenom = 0.5 * (1.0 + w[k] / r);
        ne.wfac = ne.ddenom / ne.denom;
        logw = std::log(ne.denom);
      } else {
        if (!(w[k] > 0.0)) {
          ev.negativity = false;
          ne.denom = 1.0;  // placeholders; invalid evaluations are discarded
          ne.ddenom = 0.0;
          ne.wfac = 0.0;
          ev.G[k] = 0.0;
          ne.P = Mat::Identity(n_, n_);
          continue;
        }
        ne.denom = w[k];
        ne.ddenom = 1.0;
        ne.wfac = 1.0 / w[k];
        logw = std::log(w[k]);
      }

      const Mat S = -(Hw - ne.gw * ne.gw.transpose() / (2.0 * ne.denom));
      if (eps > 0.0) {
        // Spectral smoothing lambda -> (lambda + sqrt(lambda^2+4eps^2))/2
        // keeps the log defined for indefinite S during globalization.
        Eigen::SelfAdjointEigenSolver<Mat> es(S);
        double logdet = 0.0;
        ne.P = Mat::Zero(n_, n_);
        for (int a = 0; a < n_; ++a) {
          const double lam = es.eigenvalues()[a];
          const double r = std::sqrt(lam * lam + 4.0 * eps * eps);
          const double le = 0.5 * (lam + r);
          const double dle = 0.5 * (1.0 + lam / r);
          logdet += std::log(le);
          const Vec v = es.eigenvectors().col(a);
          ne.P += (dle / le) * v * v.transpose();
        }
        ev.G[k] = logdet + cw * logw - n_ * std::log(2.0);
      } else {
        const double det =
            n_ == 1 ? S(0, 0) : S(0, 0) * S(1, 1) - S(0, 1) * S(1, 0);
        const bool pd = n_ == 1 ? S(0, 0) > 0.0 : (S(0, 0) > 0.0 && det > 0.0);
        if (!pd) {
          ev.convexity = false;
          ev.G[k] = 0.0;
          ne.P = Mat::Identity(n_, n_);
          continue;
        }
        ne.P = S.inverse();
        ev.G[k] = std::log(det) + cw * logw - n_ * std::log(2.0);
      }
    }
    return ev;
  }

  Sparse assemble(const Evaluation& ev, double cw) const {
    std::vector<Trip> trips;
    trips.reserve(static_cast<size_t>(m_) * (n_ == 2 ? 11 : 3));
    for (int k = 0; k < m_; ++k) {
      const auto [i, j] = g_.multi_index(g_.interior()[k]);
      const NodeEval& ne = ev.nodes[k];
      const Vec pg = ne.P * ne.gw;
      // scalar terms on the center value
      trips.emplace_back(k, k,
                         cw * ne.wfac - ne.gw.dot(pg) * ne.ddenom /
                                            (2.0 * ne.denom * ne.denom));
      for (int a = 0; a < n_; ++a) {
        const auto& ap = g_.arm(k, a, 1);
        const auto& am = g_.arm(k, a, 0);
        detail::Axis1D st(ap.dist, am.dist);
        const double paa = -ne.P(a, a);           // -tr(P D^2 delta), diagonal
        const double b = pg[a] / ne.denom;        // (P gw) . grad delta
        trips.emplace_back(k, k, paa * st.d2_c + b * st.d1_c);
        if (ap.rank >= 0)
          trips.emplace_back(k, ap.rank, paa * st.d2_p + b * st.d1_p);
        if (am.rank >= 0)
          trips.emplace_back(k, am.rank, paa * st.d2_m + b * st.d1_m);
      }
      if (n_ == 2) cross_row(i, j, k, -2.0 * ne.P(0, 1), trips);
    }
    Sparse J(m_, m_);
    J.setFromTriplets(trips.begin(), trips.end());
    return J;
  }

  // Mixed second difference; must mirror the potential-field evaluation
  // exactly so downstream residuals of the returned field agree with the
  // solver's own.
  double cross_value(int i, int j, const Vec& v, double vc) const {
    const double hx = g_.spacing(0), hy = g_.spacing(1);
    auto at = [&](int ii, int jj) { return g_.interior_rank_at(ii, jj); };
    const int dpp = at(i + 1, j + 1), dpm = at(i + 1, j - 1);
    const int dmp = at(i - 1, j + 1), dmm = at(i - 1, j - 1);
    if (dpp >= 0 && dpm >= 0 && dmp >= 0 && dmm >= 0)
      return (v[dpp] - v[dpm] - v[dmp] + v[dmm]) / (4.0 * hx * hy);
    double sum = 0.0;
    int count = 0;
    for (int sx = -1; sx <= 1; sx += 2)
      for (int sy = -1; sy <= 1; sy += 2) {
        const int c11 = at(i + sx, j + sy);
        const int c10 = at(i + sx, j);
        const int c01 = at(i, j + sy);
        if (c11 >= 0 && c10 >= 0 && c01 >= 0) {
          sum += sx * sy * (v[c11] - v[c10] - v[c01] + vc) / (hx * hy);
          ++count;
        }
      }
    return count > 0 ? sum / count : 0.0;
  }

  void cross_row(int i, int j, int k, double weight, std::vector<Trip>& trips) const {
    if (weight == 0.0) return;
    const double hx = g_.spacing(0), hy = g_.spacing(1);
    auto at = [&](int ii, int jj) { return g_.interior_rank_at(ii, jj); };
    const int dpp = at(i + 1, j + 1), dpm = at(i + 1, j - 1);
    const int dmp = at(i - 1, j + 1), dmm = at(i - 1, j - 1);
    if (dpp >= 0 && dpm >= 0 && dmp >= 0 && dmm >= 0) {
      const double c = weight / (4.0 * hx * hy);
      trips.emplace_back(k, dpp, c);
      trips.emplace_back(k, dmm, c);
      trips.emplace_back(k, dpm, -c);
      trips.emplace_back(k, dmp, -c);
      return;
    }
    int count = 0;
    for (int sx = -1; sx <= 1; sx += 2)
      for (int sy = -1; sy <= 1; sy += 2)
        if (at(i + sx, j + sy) >= 0 && at(i + sx, j) >= 0 && at(i, j + sy) >= 0)
          ++count;
    if (count == 0) return;
    for (int sx = -1; sx <= 1; sx += 2)
      for (int sy = -1; sy <= 1; sy += 2) {
        const int c11 = at(i + sx, j + sy);
        const int c10 = at(i + sx, j);
        const int c01 = at(i, j + sy);
        if (c11 >= 0 && c10 >= 0 && c01 >= 0) {
          const double base = weight * sx * sy / (hx * hy * count);
          trips.emplace_back(k, c11, base);
          trips.emplace_back(k, c10, -base);
          trips.emplace_back(k, c01, -base);
          trips.emplace_back(k, k, base);
        }
      }
  }

  Vec solve_linear(const Sparse& J, const Vec& rhs) const {
    Eigen::SparseLU<Sparse> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success)
      throw error("solver", "sparse factorization of the Newton system failed");
    Vec d = lu.solve(rhs);
    const double rn = rhs.norm();
    if (rn > 0.0) {
      double rel = (J * d - rhs).norm() / rn;
      if (rel > cfg_.linear_rel) {
        d += lu.solve(Vec(rhs - J * d));  // one step of iterative refinement
        rel = (J * d - rhs).norm() / rn;
        if (rel > cfg_.linear_rel) {
          std::ostringstream os;
          os << "linear solve relative residual " << rel << " exceeds "
             << cfg_.linear_rel;
          throw error("solver", os.str());
        }
      }
    }
    return d;
  }

  // Damped Newton stage. Hard stages (eps <= 0) demand validity of every
  // accepted iterate and strict residual decrease; smoothed stages only the
  // decrease. Returns true when the residual reached cfg_.tolerance.
  bool stage(Vec& w, double cw, double eps, int iter_cap, SolverReport& rep,
             bool record) const {
    Evaluation ev = evaluate(w, cw, eps);
    if (eps <= 0.0 && !ev.valid()) return false;
    double res = ev.res();
    if (record) rep.residual_history.push_back(res);
    for (int it = 0; it < iter_cap; ++it) {
      if (res <= cfg_.tolerance) return true;
      const Sparse J = assemble(ev, cw);
      const Vec delta = solve_linear(J, Vec(-ev.G));
      double alpha = 1.0;
      bool accepted = false;
      for (int h = 0; h <= cfg_.max_halvings; ++h) {
        const Vec wt = w + alpha * delta;
        Evaluation et = evaluate(wt, cw, eps);
        if ((eps > 0.0 || et.valid()) && et.res() < res) {
          w = wt;
          ev = std::move(et);
          res = ev.res();
          ++rep.iterations;
          if (record) rep.residual_history.push_back(res);
          accepted = true;
          break;
        }
        alpha *= 0.5;
        ++rep.damping_events;
      }
      if (!accepted) return res <= cfg_.tolerance;
    }
    return res <= cfg_.tolerance;
  }

 private:
  const GridSpec& g_;
  SolverConfig cfg_;
  int n_, m_;
};

double continuation_cw(int n, double s) { return (s * (n + 2) - n) / 2.0; }

constexpr double kEpsLadder[] = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};

// Closed-form reference where one exists: for the interval [-R, R] the
// solution is -sqrt(R^2 - t^2)/sqrt(R); disks and ellipses are unimodular
// affine images of the unit ball, giving -(ab)^{1/3} sqrt(1 - q(t)) with q
// the elliptic radius squared. Error taken over the q <= 0.85^2 region.
double closed_form_error(const ConvexDomain& dom, const GridSpec& g, const Vec& u) {
  std::function<double(const Vec&)> ref;
  if (dom.kind() == ConvexDomain::Kind::Interval) {
    const double c = 0.5 * (dom.lo() + dom.hi());
    const double R = 0.5 * (dom.hi() - dom.lo());
    ref = [c, R](const Vec& t) {
      const double q = (t[0] - c) * (t[0] - c) / (R * R);
      return q > 0.85 * 0.85
                 ? std::numeric_limits<double>::quiet_NaN()
                 : -std::sqrt(R) * std::sqrt(1.0 - q);
    };
  } else if (dom.kind() == ConvexDomain::Kind::Disk ||
             dom.kind() == ConvexDomain::Kind::Ellipse) {
    const Vec c = dom.center();
    const double a = dom.semi_a(), b = dom.semi_b(), th = dom.angle();
    const double amp = std::cbrt(a * b);
    ref = [c, a, b, th, amp](const Vec& t) {
      const Vec d = t - c;
      const double x = std::cos(th) * d[0] + std::sin(th) * d[1];
      const double y = -std::sin(th) * d[0] + std::cos(th) * d[1];
      const double q = x * x / (a * a) + y * y / (b * b);
      return q > 0.85 * 0.85 ? std::numeric_limits<double>::quiet_NaN()
                             : -amp * std::sqrt(1.0 - q);
    };
  } else {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double worst = 0.0;
  for (int k = 0; k < g.interior_count(); ++k) {
    const double r = ref(g.node_point(g.interior()[k]));
    if (!std::isnan(r)) worst = std::max(worst, std::abs(u[k] - r));
  }
  return worst;
}

}  // namespace

PotentialField poisson_init(const ConvexDomain& domain, const GridSpec& grid) {
  const int n = grid.dim();
  const int m = grid.interior_count();
  if (m == 0) throw precondition_error("solver", "grid has no interior nodes");
  std::vector<Trip> trips;
  trips.reserve(static_cast<size_t>(m) * (2 * n + 1));
  Vec rhs = Vec::Constant(m, -2.0 * n);
  for (int k = 0; k < m; ++k) {
    double diag = 0.0;
    for (int a = 0; a < n; ++a) {
      const auto& ap = grid.arm(k, a, 1);
      const auto& am = grid.arm(k, a, 0);
      detail::Axis1D st(ap.dist, am.dist);
      diag += st.d2_c;
      if (ap.rank >= 0) trips.emplace_back(k, ap.rank, st.d2_p);
      if (am.rank >= 0) trips.emplace_back(k, am.rank, st.d2_m);
    }
    trips.emplace_back(k, k, diag);
  }
  Sparse L(m, m);
  L.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<Sparse> lu;
  lu.compute(L);
  if (lu.info() != Eigen::Success)
    throw error("solver", "Poisson initialization: factorization failed");
  const Vec psi = lu.solve(rhs);
  if (!(psi.minCoeff() > 0.0))
    throw error("solver", "Poisson initialization produced nonpositive values");
  (void)domain;
  return PotentialField::grid(PotentialRole::PotentialU, grid,
                              Vec(-psi.cwiseSqrt()), true);
}

std::pair<PotentialField, SolverReport> solve_affine_sphere(
    const ConvexDomain& domain, const GridSpec& grid, const SolverConfig& config,
    const std::optional<PotentialField>& initial) {
  if (!(config.tolerance > 0.0) || !(config.linear_rel > 0.0))
    throw precondition_error("solver", "tolerances must be positive");
  if (config.max_newton < 1 || config.max_halvings < 1)
    throw precondition_error("solver", "iteration caps must be at least 1");
  if (grid.nodes_per_axis() < 17)
    throw precondition_error("solver", "grid must have at least 17 nodes per axis");

  const int n = grid.dim();
  const int m = grid.interior_count();
  Vec w(m);
  if (initial) {
    if (initial->dim() != n)
      throw precondition_error("solver", "initial guess dimension mismatch");
    for (int k = 0; k < m; ++k) {
      const double uv = initial->value_at(grid.node_point(grid.interior()[k]));
      if (!(uv < 0.0))
        throw precondition_error("solver", "initial guess not negative at a node");
      w[k] = uv * uv;
    }
  } else {
    const PotentialField u0 = poisson_init(domain, grid);
    w = u0.grid_values().array().square().matrix();
  }

  NewtonSolver solver(grid, config);
  SolverReport rep;
  const double cw1 = continuation_cw(n, 1.0);

  bool done = solver.stage(w, cw1, 0.0, config.max_newton, rep, true);
  if (!done) {
    // Smooth the eigenvalue/log barriers in, then try again hard.
    for (double eps : kEpsLadder) {
      ++rep.smoothing_stages;
      solver.stage(w, cw1, eps, 20, rep, false);
    }
    rep.residual_history.clear();
    done = solver.stage(w, cw1, 0.0, config.max_newton, rep, true);
  }
  if (!done) {
    // Exponent continuation (-1/u)^{s(n+2)}, warm-started.
    for (double s : {0.5, 0.75}) {
      ++rep.continuation_stages;
      const double cws = continuation_cw(n, s);
      if (!solver.evaluate(w, cws, 0.0).valid()) {
        for (double eps : kEpsLadder) solver.stage(w, cws, eps, 20, rep, false);
      }
      solver.stage(w, cws, 0.0, config.max_newton, rep, false);
    }
    rep.residual_history.clear();
    done = solver.stage(w, cw1, 0.0, config.max_newton, rep, true);
  }

  Evaluation final_ev = solver.evaluate(w, cw1, 0.0);
  rep.final_residual = final_ev.res();
  rep.negativity_certified = final_ev.negativity;
  rep.convexity_certified = final_ev.convexity;
  if (!done) {
    std::ostringstream os;
    os << "damping exhausted before reaching tolerance (residual = "
       << rep.final_residual << ")";
    throw error("solver", os.str());
  }

  const Vec u = -w.cwiseSqrt();
  rep.reference_error = closed_form_error(domain, grid, u);
  auto field = PotentialField::grid(PotentialRole::PotentialU, grid, u, true);
  return {std::move(field), std::move(rep)};
}

PotentialField perturbation_factor(const PotentialField& u_given,
                                   const PotentialField& u_bar) {
  if (u_given.role() != PotentialRole::PotentialU ||
      u_bar.role() != PotentialRole::PotentialU)
    throw precondition_error("solver", "perturbation_factor needs potential-u fields");
  if (u_given.dim() != u_bar.dim())
    throw precondition_error("solver", "perturbation_factor: dimension mismatch");

  if (u_given.is_grid() && u_bar.is_grid()) {
    const GridSpec& ga = u_given.grid_spec();
    const GridSpec& gb = u_bar.grid_spec();
    if (ga.nodes_per_axis() == gb.nodes_per_axis() &&
        ga.interior_count() == gb.interior_count() &&
        (ga.node_point(ga.interior()[0]) - gb.node_point(gb.interior()[0])).norm() ==
            0.0) {
      const Vec& a = u_given.grid_values();
      const Vec& b = u_bar.grid_values();
      Vec phi(a.size());
      for (int k = 0; k < a.size(); ++k) {
        if (!(a[k] < 0.0) || !(b[k] < 0.0))
          throw precondition_error("solver",
                                   "perturbation_factor: potentials must be negative");
        phi[k] = b[k] / a[k];
      }
      return PotentialField::grid(PotentialRole::Scalar, ga, phi, false);
    }
  }

  // Mixed/analytic path: quotient-rule evaluators over the given chart.
  auto value = [u_given, u_bar](const Vec& t) {
    const double a = u_given.value_at(t), b = u_bar.value_at(t);
    if (!(a < 0.0) || !(b < 0.0))
      throw precondition_error("solver",
                               "perturbation_factor: potentials must be negative");
    return b / a;
  };
  auto gradient = [u_given, u_bar](const Vec& t) {
    const double a = u_given.value_at(t), b = u_bar.value_at(t);
    const Vec da = u_given.gradient_at(t), db = u_bar.gradient_at(t);
    return Vec((db * a - b * da) / (a * a));
  };
  auto hessian = [u_given, u_bar](const Vec& t) {
    const double a = u_given.value_at(t), b = u_bar.value_at(t);
    const Vec da = u_given.gradient_at(t), db = u_bar.gradient_at(t);
    const Mat Ha = u_given.hessian_at(t), Hb = u_bar.hessian_at(t);
    Mat H = Hb / a - (db * da.transpose() + da * db.transpose()) / (a * a) -
            (b / (a * a)) * Ha + (2.0 * b / (a * a * a)) * da * da.transpose();
    return H;
  };
  return PotentialField::analytic(PotentialRole::Scalar, u_given.domain(), value,
                                  gradient, hessian);
}

}  // namespace asphere
