#pragma once

#include "asphere/potential.hpp"
#include "asphere/types.hpp"

#include <vector>

namespace asphere {

// The four projective/affine metric tensors.
//   Centroaffine:  -(1/u) u_ij                          (potential-u chart)
//   AffineRadial:  (det u_kl)^{-1/(n+2)} u_ij / u^2     (potential-u chart)
//   Calabi:        (det u_kl)^{+1/(n+2)} u_ij           (potential-u chart)
//   AffineGraph:   (det f_kl)^{-1/(n+2)} f_ij           (graph-f chart)
enum class MetricKind { Centroaffine, AffineRadial, Calabi, AffineGraph };

Mat metric_at(MetricKind kind, const PotentialField& source, const Vec& t);

struct MetricSample {
  Vec point;
  Mat value;
};
struct MetricField {
  MetricKind kind;
  std::vector<MetricSample> samples;
};
MetricField metric_field(MetricKind kind, const PotentialField& source,
                         const std::vector<Vec>& points);

// Log-form defect of det(u_ij) = (-1/u)^{n+2}:
//   R = log det(u_ij) + (n+2) log(-u);  R = 0 iff the equation holds at t.
double affine_sphere_residual(const PotentialField& u, const Vec& t);

// d = (det u_kl)^{-1/(n+2)} (-1/u) - 1; all three potential-u metrics above
// coincide at t iff d = 0 iff R = 0.
double coincidence_defect(const PotentialField& u, const Vec& t);

// Conormals of the graph {(x, f(x))} in dual coordinates:
//   nu = det(f_ij)^{-1/(n+2)} (-grad f, 1),  mu = -(1/v)(-grad f, 1),
// with v = x.grad f - f the Legendre transform value at x.
struct ConormalSample {
  Vec nu;
  Vec mu;
  double alpha = 0.0;  // last component of nu
};
ConormalSample conormals_at(const PotentialField& f, const Vec& x);

// Conormals of the radial graph {-(1/u)(t, 1)} computed in the potential
// chart without inverting the graph map:
//   mu = (-grad u, t.grad u - u),  nu = det(u_ij)^{-1/(n+2)}/(-u) * mu;
// agrees with conormals_at at x = -t/u on the graph side.
ConormalSample radial_conormals_at(const PotentialField& u, const Vec& t);

// Dual potential: the mu-image of the radial graph of -1/u, written over the
// dual inhomogeneous chart eta (surface points (-1/u_dual)(eta, 1)). Samples
// fix the dual chart region and must have transverse position vectors.
PotentialField centroaffine_dual(const PotentialField& u,
                                 const std::vector<Vec>& samples);

// Cubic form, shape operator (index lowered by g) and affine metric at x,
// extracted from the conormal structure equation
//   nu_{,ij} = -sum_k A_ij^k nu_{,k} - B_ij nu
// in general coordinates; A_ijk = A_ij^l g_lk.
struct InvariantsSample {
  std::vector<Mat> A;  // A[k](i,j) = A_ijk
  Mat B;
  Mat g;
};
InvariantsSample fubini_pick_at(const PotentialField& f, const Vec& x);

// Affine-metric length of the segment x(z) = z*y, z in [z0, z1]:
//   l = integral of [(det f_kl)^{-1/(n+2)} f_ij y^i y^j]^{1/2} dz
// by adaptive Simpson bisection to relative tolerance rtol.
double geodesic_length(const PotentialField& f, const Vec& y, double z0, double z1,
                       double rtol = 1e-8);

// Length of the straight segment [a, b] in the chosen metric of the source
// field (used for radial-chart length studies).
double metric_path_length(MetricKind kind, const PotentialField& source, const Vec& a,
                          const Vec& b, double rtol = 1e-8);

}  // namespace asphere
