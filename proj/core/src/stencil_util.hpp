#pragma once

// Internal finite-difference weight helpers shared by the grid-backed field
// caches and the nonlinear solver. Not installed.

namespace asphere::detail {

// Weights for unequal-arm three-point stencils on a line: values at
// center c, plus-neighbor p (distance hp), minus-neighbor m (distance hm).
// Both formulas are exact on quadratics.
struct Axis1D {
  double d2_p, d2_m, d2_c;  // second derivative
  double d1_p, d1_m, d1_c;  // first derivative

  Axis1D(double hp, double hm) {
    const double s = hp + hm;
    d2_p = 2.0 / (hp * s);
    d2_m = 2.0 / (hm * s);
    d2_c = -2.0 / (hp * hm);
    d1_p = hm / (hp * s);
    d1_m = -hp / (hm * s);
    d1_c = (hp - hm) / (hp * hm);
  }
};

}  // namespace asphere::detail
