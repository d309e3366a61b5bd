#pragma once

#include "asphere/domain.hpp"
#include "asphere/grid.hpp"
#include "asphere/projective.hpp"
#include "asphere/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace asphere {

// Sign/shape convention a field obeys.
//   PotentialU: negative convex potential u over its domain (u < 0 interior).
//   GraphF:     convex graph function f (typically positive).
//   Scalar:     plain scalar field, no sign or convexity contract.
enum class PotentialRole { PotentialU, GraphF, Scalar };

struct HessianSample {
  Mat matrix;
  double min_eigenvalue = 0.0;
  bool positive_definite = false;
};

// Scalar field over a convex domain, analytic-callback or grid-sampled,
// with first and second derivatives. Immutable value type.
class PotentialField {
 public:
  using ValueFn = std::function<double(const Vec&)>;
  using GradFn = std::function<Vec(const Vec&)>;
  using HessFn = std::function<Mat(const Vec&)>;

  // Analytic representation. Missing gradient/Hessian callbacks fall back to
  // central differences of the value callback.
  static PotentialField analytic(PotentialRole role, ConvexDomain domain,
                                 ValueFn value, GradFn gradient = nullptr,
                                 HessFn hessian = nullptr);

  // Grid representation: one value per interior node of the grid.
  // boundary_zero: the field extends continuously by 0 at the cut points
  // where grid lines meet the domain boundary (Dirichlet data); derivative
  // stencils then use those zeros with exact cut distances.
  static PotentialField grid(PotentialRole role, GridSpec grid_spec,
                             Vec interior_values, bool boundary_zero);

  PotentialRole role() const;
  int dim() const;
  const ConvexDomain& domain() const;

  bool is_grid() const;
  const GridSpec& grid_spec() const;  // error when analytic
  const Vec& grid_values() const;     // error when analytic
  bool boundary_zero() const;

  double value_at(const Vec& t) const;
  Vec gradient_at(const Vec& t) const;
  Mat hessian_at(const Vec& t) const;

  // Interior minimum (argmin over nodes for grids; lattice scan refined by
  // Newton steps for analytic fields).
  const Vec& base_point() const;

 private:
  struct Impl;
  explicit PotentialField(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

// Hessian with an eigenvalue report (positive-definiteness uses the
// scale-aware tolerance min_eig > 1e-10 * (1 + trace)).
HessianSample hessian_report_at(const PotentialField& u, const Vec& t);

// Image of u under a projective map acting on the inhomogeneous chart:
// with S = A^{-1} and lambda_S(s) = last row of S applied to (s,1),
// u~(s) = lambda_S(s) * u(S s). The radial graph of -1/u~ is A applied to
// the radial graph of -1/u. Defined for PotentialU fields.
PotentialField transform_potential(const PotentialField& u, const ProjectiveMap& map);

// Connected sublevel region around the minimum p:
//   PotentialU: { u < -1/h },  GraphF: { f < h }.
// (Both describe the same height-h cut of the underlying radial graph.)
class SublevelSet {
 public:
  double level() const { return h_; }
  const Vec& base_point() const { return p_; }
  double threshold() const { return cut_; }
  bool empty() const { return empty_; }
  bool contains(const Vec& t) const;
  // Grid fields: member interior-node flat indices (face-connected component
  // of the node nearest p). Empty for analytic fields.
  const std::vector<int>& nodes() const { return nodes_; }
  // Distance from p to the set boundary along a direction (analytic fields).
  double boundary_radius(const Vec& dir) const;

 private:
  friend SublevelSet sublevel_set(const PotentialField&, double, const Vec&);
  PotentialField field_;
  double h_ = 0.0;
  double cut_ = 0.0;
  Vec p_;
  bool empty_ = true;
  std::vector<int> nodes_;
  std::vector<bool> node_member_;
  explicit SublevelSet(PotentialField f) : field_(std::move(f)) {}
};

SublevelSet sublevel_set(const PotentialField& u, double h, const Vec& p);

// Graph function f over the x-chart whose Euclidean graph is the radial
// graph of -1/u: x = -t/u(t), f(x) = -1/u(t). chart_radius <= 0 requests the
// largest ball the image covers (capped at a large default for complete
// images where u -> 0 on the boundary).
PotentialField radial_graph(const PotentialField& u, double chart_radius = 0.0);

// Built-in fields (see README):
//   ball        PotentialU  u = -sqrt(1-|t|^2) on the unit ball
//   quadratic   PotentialU  u = -1 + |t|^2/4 on the unit ball
//   hyperboloid GraphF      f = sqrt(1+|x|^2) on a ball (default radius 10)
//   polynomial  GraphF      f = sum_m c_m |x|^(2m) on a ball (default radius 1)
PotentialField builtin_ball(int n);
PotentialField builtin_quadratic(int n);
PotentialField builtin_hyperboloid(int n, double radius = 10.0);
PotentialField builtin_polynomial(int n, const std::vector<double>& coeffs,
                                  double radius = 1.0);
PotentialField make_builtin(const std::string& name, int n,
                            const std::vector<double>& coeffs = {},
                            std::optional<ConvexDomain> domain = std::nullopt);

}  // namespace asphere
