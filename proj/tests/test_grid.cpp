#include "doctest.h"

#include <asphere/grid.hpp>

#include <cmath>

using namespace asphere;

TEST_CASE("interval grid masks endpoints and cuts nothing") {
  GridSpec g(ConvexDomain::interval(-1.0, 1.0), 9);
  CHECK(g.dim() == 1);
  CHECK(g.spacing(0) == doctest::Approx(0.25));
  // endpoints are boundary, the 7 internal nodes are interior
  CHECK(g.interior_count() == 7);
  // innermost arms connect; the outermost arm is a boundary cut of a full step
  const int first = 0;  // rank of node at t = -0.75
  CHECK(g.arm(first, 0, 0).rank == -1);
  CHECK(g.arm(first, 0, 0).dist == doctest::Approx(0.25));
  CHECK(g.arm(first, 0, 1).rank >= 0);
}

TEST_CASE("disk grid cut arms carry exact boundary distances") {
  GridSpec g(ConvexDomain::disk(vec2(0.0, 0.0), 1.0), 17);
  CHECK(g.interior_count() > 0);
  int cuts = 0;
  for (int k = 0; k < g.interior_count(); ++k) {
    const Vec p = g.node_point(g.interior()[k]);
    for (int a = 0; a < 2; ++a) {
      for (int s = 0; s < 2; ++s) {
        const auto& arm = g.arm(k, a, s);
        CHECK(arm.dist > 0.0);
        CHECK(arm.dist <= g.spacing(a) + 1e-15);
        if (arm.rank < 0) {
          ++cuts;
          // walking the cut distance must land on the unit circle
          Vec q = p;
          q[a] += (s ? 1.0 : -1.0) * arm.dist;
          CHECK(q.norm() == doctest::Approx(1.0).epsilon(1e-12));
        }
      }
    }
  }
  CHECK(cuts > 0);
}

TEST_CASE("square grid has no cut arms away from the boundary ring") {
  GridSpec g(ConvexDomain::square(1.0), 9);
  // all 7x7 internal lattice nodes are interior
  CHECK(g.interior_count() == 49);
  for (int k = 0; k < g.interior_count(); ++k)
    for (int a = 0; a < 2; ++a)
      for (int s = 0; s < 2; ++s) {
        const auto& arm = g.arm(k, a, s);
        if (arm.rank < 0) CHECK(arm.dist == doctest::Approx(g.spacing(a)));
      }
}

TEST_CASE("flat and multi index round-trip") {
  GridSpec g(ConvexDomain::square(1.0), 9);
  for (int f : g.interior()) {
    auto [i, j] = g.multi_index(f);
    CHECK(g.flat_index(i, j) == f);
    CHECK(g.interior_rank_at(i, j) >= 0);
  }
}
