#pragma once

#include "asphere/domain.hpp"
#include "asphere/grid.hpp"
#include "asphere/potential.hpp"
#include "asphere/types.hpp"

#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace asphere {

struct SolverConfig {
  double tolerance = 1e-9;   // max-norm of the log-form residual
  int max_newton = 50;       // Newton iteration cap per stage
  int max_halvings = 30;     // step-halving cap per iteration
  double linear_rel = 1e-10; // required relative residual of linear solves
};

struct SolverReport {
  int iterations = 0;                    // accepted Newton steps, all stages
  std::vector<double> residual_history;  // max-norm residuals, final phase
  int damping_events = 0;                // total step halvings
  int smoothing_stages = 0;              // eigenvalue-smoothing stages used
  int continuation_stages = 0;           // reduced-exponent stages used
  double final_residual = 0.0;
  bool negativity_certified = false;     // u < 0 at every interior node
  bool convexity_certified = false;      // discrete Hessian PD at every node
  // Max interior error against the closed-form solution on |t - c| <= 0.85 R
  // (interval/disk domains only; NaN otherwise).
  double reference_error = std::numeric_limits<double>::quiet_NaN();
};

// Solve the Poisson problem (Laplacian psi) = -2n with psi = 0 on the true
// boundary (cut-cell stencils) and return the initial guess u0 = -sqrt(psi).
PotentialField poisson_init(const ConvexDomain& domain, const GridSpec& grid);

// Dirichlet problem det(D^2 u) = (-1/u)^{n+2}, u < 0 interior, u = 0 on the
// boundary, by damped Newton on the log-form residual with eigenvalue
// smoothing and exponent continuation as globalization fallbacks. The
// optional initial guess replaces poisson_init (values are sampled at grid
// nodes and must be negative).
std::pair<PotentialField, SolverReport> solve_affine_sphere(
    const ConvexDomain& domain, const GridSpec& grid, const SolverConfig& config = {},
    const std::optional<PotentialField>& initial = std::nullopt);

// Perturbation factor phi = u_bar / u_given, a positive scalar field on the
// common chart; phi * u_given reproduces u_bar identically.
PotentialField perturbation_factor(const PotentialField& u_given,
                                   const PotentialField& u_bar);

}  // namespace asphere
