#include "doctest.h"

#include <asphere/potential.hpp>

#include <cmath>

using namespace asphere;

namespace {

PotentialField grid_sampled_ball(int nodes) {
  GridSpec g(ConvexDomain::unit_ball(2), nodes);
  Vec vals(g.interior_count());
  for (int k = 0; k < g.interior_count(); ++k) {
    const Vec p = g.node_point(g.interior()[k]);
    vals[k] = -std::sqrt(1.0 - p.squaredNorm());
  }
  return PotentialField::grid(PotentialRole::PotentialU, g, vals, /*boundary_zero=*/true);
}

}  // namespace

TEST_CASE("builtin closed forms") {
  SUBCASE("ball potential at the center") {
    auto u = builtin_ball(2);
    CHECK(u.value_at(vec2(0, 0)) == doctest::Approx(-1.0));
    CHECK(u.gradient_at(vec2(0, 0)).norm() < 1e-14);
    CHECK((u.hessian_at(vec2(0, 0)) - Mat::Identity(2, 2)).norm() < 1e-12);
    auto rep = hessian_report_at(u, vec2(0.3, -0.2));
    CHECK(rep.positive_definite);
  }

  SUBCASE("quadratic potential is exactly quadratic") {
    auto u = builtin_quadratic(2);
    CHECK(u.value_at(vec2(0.4, 0.2)) == doctest::Approx(-1.0 + 0.25 * 0.2));
    CHECK((u.hessian_at(vec2(0.7, 0.1)) - 0.5 * Mat::Identity(2, 2)).norm() < 1e-14);
  }

  SUBCASE("hyperboloid graph function") {
    auto f = builtin_hyperboloid(1);
    CHECK(f.value_at(vec1(1.0)) == doctest::Approx(std::sqrt(2.0)));
    // f'' = (1+x^2)^{-3/2}
    CHECK(f.hessian_at(vec1(1.0))(0, 0) == doctest::Approx(std::pow(2.0, -1.5)));
  }

  SUBCASE("radial polynomial derivatives") {
    auto f = builtin_polynomial(2, {0.0, 0.5, 0.25});  // |x|^2/2 + |x|^4/4
    Vec x = vec2(0.6, -0.3);
    const double s = x.squaredNorm();
    CHECK(f.value_at(x) == doctest::Approx(0.5 * s + 0.25 * s * s));
    CHECK((f.gradient_at(x) - (1.0 + s) * x).norm() < 1e-13);
    Mat expect = (1.0 + s) * Mat::Identity(2, 2) + 2.0 * x * x.transpose();
    CHECK((f.hessian_at(x) - expect).norm() < 1e-12);
  }
}

TEST_CASE("constant field has zero Hessian and no convexity certificate") {
  GridSpec g(ConvexDomain::unit_ball(2), 17);
  Vec vals = Vec::Constant(g.interior_count(), -1.0);
  auto u = PotentialField::grid(PotentialRole::PotentialU, g, vals, false);
  auto rep = hessian_report_at(u, vec2(0.1, 0.1));
  CHECK(rep.matrix.norm() < 1e-12);
  CHECK_FALSE(rep.positive_definite);
}

TEST_CASE("missing-callback fallbacks differentiate the value") {
  auto f = PotentialField::analytic(
      PotentialRole::GraphF, ConvexDomain::unit_ball(2),
      [](const Vec& x) { return std::exp(x[0]) + 0.5 * x[1] * x[1]; });
  Vec x = vec2(0.2, -0.1);
  CHECK(f.gradient_at(x)[0] == doctest::Approx(std::exp(0.2)).epsilon(1e-8));
  CHECK(f.gradient_at(x)[1] == doctest::Approx(-0.1).epsilon(1e-8));
  CHECK(f.hessian_at(x)(0, 0) == doctest::Approx(std::exp(0.2)).epsilon(1e-5));
  CHECK(f.hessian_at(x)(1, 1) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(std::abs(f.hessian_at(x)(0, 1)) < 1e-5);
}

TEST_CASE("grid-sampled sphere potential reproduces analytic derivatives") {
  // The square of the exact potential is the quadratic 1 - |t|^2, so the
  // substitution stencils should be exact up to rounding even at cut nodes.
  auto u = grid_sampled_ball(33);
  auto exact = builtin_ball(2);
  const GridSpec& g = u.grid_spec();
  double worst_h = 0.0, worst_g = 0.0;
  for (int k = 0; k < g.interior_count(); ++k) {
    const Vec p = g.node_point(g.interior()[k]);
    worst_g = std::max(worst_g, (u.gradient_at(p) - exact.gradient_at(p)).norm());
    worst_h = std::max(worst_h, (u.hessian_at(p) - exact.hessian_at(p)).norm());
  }
  CHECK(worst_g < 1e-10);
  CHECK(worst_h < 1e-8);
}

TEST_CASE("plain grid stencils are second order on smooth data") {
  GridSpec g(ConvexDomain::square(1.0), 33);
  Vec vals(g.interior_count());
  for (int k = 0; k < g.interior_count(); ++k) {
    const Vec p = g.node_point(g.interior()[k]);
    vals[k] = std::sin(p[0]) * std::cos(p[1]);
  }
  auto f = PotentialField::grid(PotentialRole::Scalar, g, vals, false);
  Vec p = vec2(0.25, -0.25);  // a grid node for N=33 on [-1,1]
  CHECK(f.value_at(p) == doctest::Approx(std::sin(0.25) * std::cos(0.25)).epsilon(1e-12));
  CHECK(f.gradient_at(p)[0] ==
        doctest::Approx(std::cos(0.25) * std::cos(0.25)).epsilon(1e-3));
  // d2/dxdy sin(x)cos(y) = -cos(x)sin(y), positive at y = -0.25
  CHECK(f.hessian_at(p)(0, 1) ==
        doctest::Approx(std::cos(0.25) * std::sin(0.25)).epsilon(1e-2));
}

TEST_CASE("interpolation between nodes stays second order") {
  auto u = grid_sampled_ball(65);
  auto exact = builtin_ball(2);
  Vec p = vec2(0.31173, -0.20417);  // generic off-node point
  CHECK(u.value_at(p) == doctest::Approx(exact.value_at(p)).epsilon(1e-4));
  CHECK((u.gradient_at(p) - exact.gradient_at(p)).norm() < 2e-3);

  // Off-node evaluation of a zero-boundary potential expands w = u^2, which
  // is exactly quadratic for the ball, so the square-root blowup of the
  // derivatives is reproduced even microns away from the boundary.
  Vec q = vec2(1.0 - 1e-6, 0.0);
  CHECK(u.value_at(q) == doctest::Approx(exact.value_at(q)).epsilon(1e-9));
  const double hxx = exact.hessian_at(q)(0, 0);  // ~ delta^{-3/2}, huge
  CHECK(u.hessian_at(q)(0, 0) == doctest::Approx(hxx).epsilon(1e-8));
}

TEST_CASE("base point") {
  SUBCASE("analytic argmin with refinement") {
    auto u = builtin_quadratic(2);
    CHECK(u.base_point().norm() < 1e-9);
  }
  SUBCASE("grid argmin") {
    auto u = grid_sampled_ball(33);
    CHECK(u.base_point().norm() < 1e-12);
  }
  SUBCASE("translated minimum follows the field") {
    auto u = builtin_quadratic(2);
    auto map = ProjectiveMap::affine(Mat::Identity(2, 2), vec2(0.2, -0.1));
    auto v = transform_potential(u, map);
    CHECK((v.base_point() - vec2(0.2, -0.1)).norm() < 1e-7);
  }
}

TEST_CASE("potential-u sign contract enforced") {
  CHECK_THROWS_WITH_AS(
      PotentialField::analytic(PotentialRole::PotentialU, ConvexDomain::unit_ball(2),
                               [](const Vec& t) { return 1.0 - t.squaredNorm(); }),
      doctest::Contains("nonnegative"), std::exception);
}

TEST_CASE("projective transform of a potential") {
  SUBCASE("identity map leaves values in place") {
    auto u = builtin_ball(1);
    auto v = transform_potential(u, ProjectiveMap::identity(1));
    CHECK(v.value_at(vec1(0.33)) == doctest::Approx(u.value_at(vec1(0.33))).epsilon(1e-14));
  }

  SUBCASE("translation shifts the argument") {
    auto u = builtin_quadratic(2);
    auto map = ProjectiveMap::affine(Mat::Identity(2, 2), vec2(0.5, 0.0));
    auto v = transform_potential(u, map);
    CHECK(v.value_at(vec2(0.8, 0.1)) ==
          doctest::Approx(u.value_at(vec2(0.3, 0.1))).epsilon(1e-14));
  }

  SUBCASE("hyperbolic rescale of the sphere potential") {
    // diag(sqrt 2, 1/sqrt 2) sends u* to -sqrt(2) sqrt(1 - t^2/4) on (-2, 2)
    auto u = builtin_ball(1);
    Mat raw(2, 2);
    raw << std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0);
    auto v = transform_potential(u, ProjectiveMap::normalized(raw));
    for (double t : {-1.7, -0.4, 0.0, 1.2, 1.9}) {
      const double expect = -std::sqrt(2.0) * std::sqrt(1.0 - t * t / 4.0);
      CHECK(v.value_at(vec1(t)) == doctest::Approx(expect).epsilon(1e-12));
    }
    // derivative laws: compare against closed forms of the image potential
    const double t = 0.8;
    const double s = std::sqrt(1.0 - t * t / 4.0);
    CHECK(v.gradient_at(vec1(t))[0] ==
          doctest::Approx(std::sqrt(2.0) * t / (4.0 * s)).epsilon(1e-12));
    CHECK(v.hessian_at(vec1(t))(0, 0) ==
          doctest::Approx(std::sqrt(2.0) / (4.0 * s * s * s)).epsilon(1e-12));
  }

  SUBCASE("composition law") {
    auto u = builtin_ball(1);
    Mat a(2, 2), b(2, 2);
    a << 1.1, 0.05, 0.02, 0.95;
    b << 0.9, -0.1, 0.01, 1.05;
    auto A = ProjectiveMap::normalized(a);
    auto B = ProjectiveMap::normalized(b);
    auto lhs = transform_potential(u, A.compose(B));
    auto rhs = transform_potential(transform_potential(u, B), A);
    for (double t : {-0.3, 0.0, 0.41}) {
      CHECK(lhs.value_at(vec1(t)) == doctest::Approx(rhs.value_at(vec1(t))).epsilon(1e-12));
    }
  }
}

TEST_CASE("sublevel sets of the sphere potential") {
  auto u = builtin_ball(2);
  Vec p = vec2(0.0, 0.0);

  SUBCASE("h = 2 cuts the disk of radius sqrt(3)/2") {
    auto s = sublevel_set(u, 2.0, p);
    CHECK_FALSE(s.empty());
    const double r = s.boundary_radius(vec2(1.0, 0.0));
    CHECK(r == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-10));
    CHECK(s.contains(vec2(0.8, 0.0)));
    CHECK_FALSE(s.contains(vec2(0.9, 0.0)));
  }

  SUBCASE("h = 1 is the empty boundary case") {
    auto s = sublevel_set(u, 1.0, p);
    CHECK(s.empty());
    CHECK_FALSE(s.contains(p));
  }

  SUBCASE("monotone nesting") {
    auto s1 = sublevel_set(u, 1.5, p);
    auto s2 = sublevel_set(u, 3.0, p);
    for (double r = 0.05; r < 1.0; r += 0.1) {
      Vec q = vec2(r, 0.0);
      if (s1.contains(q)) CHECK(s2.contains(q));
    }
  }

  SUBCASE("huge level fills the grid interior") {
    auto ug = grid_sampled_ball(17);
    auto s = sublevel_set(ug, 1e6, ug.base_point());
    CHECK(static_cast<int>(s.nodes().size()) == ug.grid_spec().interior_count());
  }

  SUBCASE("non-minimum base point rejected") {
    CHECK_THROWS_WITH_AS(sublevel_set(u, 2.0, vec2(0.5, 0.0)),
                         doctest::Contains("minimum"), std::exception);
  }
}

TEST_CASE("radial graph of the sphere potential is the hyperboloid") {
  auto u = builtin_ball(2);
  auto f = radial_graph(u, 3.0);
  CHECK(f.role() == PotentialRole::GraphF);
  for (double r : {0.0, 0.5, 1.5, 2.5}) {
    Vec x = vec2(r * 0.6, r * 0.8);
    const double expect = std::sqrt(1.0 + x.squaredNorm());
    CHECK(f.value_at(x) == doctest::Approx(expect).epsilon(1e-12));
    Vec gexp = x / expect;
    CHECK((f.gradient_at(x) - gexp).norm() < 1e-10);
    Mat hexp = Mat::Identity(2, 2) / expect -
               x * x.transpose() / (expect * expect * expect);
    CHECK((f.hessian_at(x) - hexp).norm() < 1e-9);
  }
}

TEST_CASE("radial graph needs the origin inside the domain") {
  auto u = builtin_quadratic(2);
  auto map = ProjectiveMap::affine(Mat::Identity(2, 2), vec2(5.0, 0.0));
  auto shifted = transform_potential(u, map);
  CHECK_THROWS_WITH_AS(radial_graph(shifted), doctest::Contains("origin"), std::exception);
}

TEST_CASE("radial graph of a non-vanishing potential has a bounded image") {
  // u = -1 + |t|^2/4 on the unit disk keeps u <= -3/4, so the image radius is
  // r/( -u ) at the rim = 1/(3/4) = 4/3.
  auto u = builtin_quadratic(2);
  auto f = radial_graph(u);
  CHECK(f.domain().contains(vec2(1.3, 0.0)));
  CHECK_FALSE(f.domain().contains(vec2(1.34, 0.0)));
  CHECK_THROWS_WITH_AS(f.value_at(vec2(1.35, 0.0)), doctest::Contains("outside"),
                       std::exception);
}
