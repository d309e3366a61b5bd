#pragma once

#include "asphere/potential.hpp"
#include "asphere/types.hpp"

namespace asphere {

// Primal/dual pair under the Legendre transform v(y) = x.y - f(x) with
// y = grad f(x). The dual is analytic (per-query Newton inversion of grad f)
// when f is analytic, grid-resampled when f is a grid field.
class LegendrePair {
 public:
  const PotentialField& primal() const { return f_; }
  const PotentialField& dual() const { return v_; }

  // gradient map y(x) and its inverse x(y)
  Vec forward(const Vec& x) const;
  Vec inverse(const Vec& y) const;

 private:
  friend LegendrePair legendre_transform(const PotentialField&);
  LegendrePair(PotentialField f, PotentialField v) : f_(std::move(f)), v_(std::move(v)) {}
  PotentialField f_;
  PotentialField v_;
};

LegendrePair legendre_transform(const PotentialField& f);

// Componentwise defect of d(v o y)/dx_j = x_i f_ij, evaluated through two
// independent paths (the dual field's own gradient versus the identity).
Vec gradient_identity_defect(const LegendrePair& pair, const Vec& x);

// v + f at x; nonnegative whenever f has its minimum at the origin.
double duality_gap(const LegendrePair& pair, const Vec& x);

}  // namespace asphere
