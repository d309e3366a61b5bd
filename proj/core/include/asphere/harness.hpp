#pragma once

#include "asphere/potential.hpp"
#include "asphere/projective.hpp"
#include "asphere/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace asphere {

// One evaluation of the sublevel gradient estimate. All quantities live at a
// single point of the graph chart:
//   x      graph-chart coordinates of the sample,
//   f      graph height f(x),
//   v      Legendre transform value x.grad f - f (negative),
//   w      -1/v,
//   psi    -(1/v) (det f_kl)^{1/(n+2)},
//   grad_norm_ratio   |grad v|_g / (-v) in the graph affine metric,
//   Q      grad_norm_ratio * sqrt(h - f) for the height h of the scan.
// Samples taken from a potential-u field are mapped through the radial graph
// x = -t/u, f = -1/u analytically, so both roles report the same scalars at
// corresponding points.
struct GradEstimateSample {
  Vec x;
  double f = 0.0;
  double v = 0.0;
  double w = 0.0;
  double psi = 0.0;
  double grad_norm_ratio = 0.0;
  double Q = 0.0;
};

struct StudyCriterion {
  std::string name;
  bool passed = false;
  double value = 0.0;
};

// Result of one verification study. `sweep` and `measured` are the x/y pair
// of the study's primary curve (heights and sup Q, decade indices and
// lengths, grid levels and errors); named scalars land in `fitted`;
// `criteria` carries the asserted outcomes, `notes` the non-fatal remarks.
// Deterministic for a fixed seed and configuration.
struct StudyReport {
  std::string kind;
  std::vector<double> sweep;
  std::vector<double> measured;
  std::map<std::string, double> fitted;
  std::vector<StudyCriterion> criteria;
  std::vector<std::string> notes;
  std::uint64_t seed = 0;
  bool passed() const;
};

// |grad v|_g / (-v) at one point (graph chart for GraphF fields, potential
// chart for PotentialU fields), evaluated through the Legendre identity
//   |grad v|^2 / v^2 = psi^2 (det f_kl)^{-1/(n+2)} f_ij x^i x^j.
double gradient_ratio(const PotentialField& field, const Vec& point);

// Full sample at a prescribed height h (requires f(point) < h).
GradEstimateSample gradient_sample(const PotentialField& field, const Vec& point,
                                   double h);

// Lattice scan of Q = ratio * sqrt(h - f) over the connected sublevel region
// of height h around the field's minimum. Reports the sup and argmax, then
// repeats at doubled resolution and reports the relative change. Nodes closer
// to the sublevel boundary than 10 lattice spacings (in height: h - f <
// 10 * spacing) are excluded from the sup to keep the 0 * infinity rim noise
// out; if the band swallows every node the unfiltered sup is reported and a
// note records it.
StudyReport gradient_estimate_scan(const PotentialField& field, double h,
                                   int nodes_per_axis = 129);

// Lengths along the ray from the field's minimum in the given direction.
//   GraphF:     l_k = affine-metric length of the graph ray out to 10^k,
//               k = 0..k_max (decades of the chart radius).
//   PotentialU: l_k = affine-metric length out to the fraction z_k =
//               1 - 10^{-k} of the distance to the domain boundary,
//               k = 1..k_max.
// Asserts strict increase and a uniform lower bound (0.5) on the increments
// from the third sweep point on; the lengths must diverge, never stall.
StudyReport divergence_study(const PotentialField& field, const Vec& direction,
                             int k_max, double rtol = 1e-8);

// Solve one of the named Dirichlet problems ("interval", "disk", "ellipse",
// "square") on each grid level and fit the interior error order by least
// squares in log h. The closed-form problems are measured against their exact
// solutions; the square (no closed form) is measured against a reference
// solve at twice the finest resolution. Error sequences at rounding level
// (max <= 1e-12) short-circuit to the "exact" verdict; non-monotone decay is
// flagged. min_order is the asserted lower bound when a genuine order is fit.
StudyReport convergence_order(const std::string& problem,
                              const std::vector<int>& levels,
                              double min_order = 1.5);

// Check projective naturality of the solved-for structures on a potential-u
// field: for each normalized, orientation-preserving map A (lift L) and
// sample point t,
//   residual:  R(u~)(A t) = R(u)(t),
//   conormal:  nu~(A t) = (L^T)^{-1} nu(t) for the radial-graph conormal,
//   metric:    J^T g~(A t) J = g(t) (centroaffine and affine-radial kinds),
// where u~ is the transformed potential and J the chart Jacobian of A at t.
// Sample points are drawn uniformly from the domain interior with the given
// seed. Maps whose image leaves the chart are skipped and noted, not failed.
StudyReport equivariance_suite(const PotentialField& u,
                               const std::vector<ProjectiveMap>& maps,
                               std::uint64_t seed = 12345,
                               int samples_per_map = 20, double tol = 1e-9);

// Reproducible batch of normalized affine maps (moderate shear + shift) for
// the equivariance suite.
std::vector<ProjectiveMap> random_affine_maps(int dim, int count,
                                              std::uint64_t seed);

// Standard batch of five analytic convex graph fields (1-D and 2-D) with
// minimum at the origin, used for Legendre-transform verification.
std::vector<PotentialField> legendre_test_fields();

// Legendre-transform health over a batch of convex graph fields: involution
// round trip x -> grad f(x) -> inverse, the gradient identity defect, and the
// duality-gap sign, at samples_per_field random interior points per field.
// Criteria: involution and defect maxima <= tol, gap minimum >= -1e-12.
StudyReport legendre_suite(const std::vector<PotentialField>& fields,
                           std::uint64_t seed = 12345, int samples_per_field = 2000,
                           double tol = 1e-10);

}  // namespace asphere
