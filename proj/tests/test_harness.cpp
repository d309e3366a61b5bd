#include "asphere/harness.hpp"

#include "asphere/domain.hpp"
#include "asphere/grid.hpp"
#include "asphere/invariants.hpp"
#include "asphere/potential.hpp"
#include "asphere/solver.hpp"

#include <doctest.h>

#include <cmath>

using namespace asphere;
using doctest::Approx;

namespace {

const StudyCriterion* find_criterion(const StudyReport& rep, const std::string& needle) {
  for (const auto& c : rep.criteria)
    if (c.name.find(needle) != std::string::npos) return &c;
  return nullptr;
}

}  // namespace

TEST_CASE("gradient ratio closed forms") {
  SUBCASE("hyperboloid slope") {
    auto f = builtin_hyperboloid(1);
    // ratio = |x| / sqrt(1 + x^2)
    CHECK(gradient_ratio(f, vec1(1.0)) == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(gradient_ratio(f, vec1(-2.0)) == Approx(2.0 / std::sqrt(5.0)).epsilon(1e-12));
    CHECK(gradient_ratio(f, vec1(0.0)) == Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("identity against the direct affine-metric norm") {
    // |grad v|_g / (-v) computed independently: grad v has components
    // x^i f_ij, the metric inverse is (det f)^{1/(n+2)} f^{ij}.
    auto f = builtin_polynomial(2, {2.0, 0.5, 0.15}, 2.0);
    for (double a : {0.3, 0.8, 1.2}) {
      const Vec x = vec2(a, 0.4 * a - 0.2);
      const double fv = f.value_at(x);
      const Vec g = f.gradient_at(x);
      const Mat H = f.hessian_at(x);
      const double v = x.dot(g) - fv;
      REQUIRE(v < 0.0);
      const Vec dv = H * x;
      const double direct =
          std::sqrt(std::pow(H.determinant(), 0.25) * dv.dot(H.inverse() * dv)) / (-v);
      CHECK(gradient_ratio(f, x) == Approx(direct).epsilon(1e-10));
    }
  }
  SUBCASE("potential chart agrees with the graph chart") {
    auto u = builtin_ball(1);
    auto f = builtin_hyperboloid(1, 50.0);
    for (double t : {0.1, 0.5, 0.9}) {
      const double x = t / std::sqrt(1.0 - t * t);  // x = -t/u
      CHECK(gradient_ratio(u, vec1(t)) == Approx(gradient_ratio(f, vec1(x))).epsilon(1e-10));
      CHECK(gradient_ratio(u, vec1(t)) == Approx(t).epsilon(1e-10));
    }
  }
  SUBCASE("transversality failure throws") {
    auto f = PotentialField::analytic(
        PotentialRole::GraphF, ConvexDomain::disk(vec2(0, 0), 3.0),
        [](const Vec& x) { return 1.0 + 0.5 * x.squaredNorm(); });
    // v = |x|^2/2 - 1 vanishes on |x| = sqrt(2) and is positive outside
    CHECK_THROWS_AS(gradient_ratio(f, vec2(2.0, 0.0)), std::runtime_error);
    CHECK_NOTHROW(gradient_ratio(f, vec2(0.5, 0.0)));
  }
  SUBCASE("scalar fields rejected") {
    auto s = PotentialField::analytic(PotentialRole::Scalar,
                                      ConvexDomain::unit_ball(2),
                                      [](const Vec& t) { return t.squaredNorm(); });
    CHECK_THROWS_AS(gradient_ratio(s, vec2(0.1, 0.1)), std::invalid_argument);
  }
}

TEST_CASE("gradient sample fields are mutually consistent") {
  auto u = builtin_ball(2);
  const Vec t = vec2(0.3, -0.4);
  auto s = gradient_sample(u, t, 4.0);
  const double uval = u.value_at(t);
  CHECK(s.f == Approx(-1.0 / uval).epsilon(1e-13));
  CHECK((s.x - (-t / uval)).norm() < 1e-13);
  CHECK(s.v < 0.0);
  CHECK(s.w == Approx(-1.0 / s.v).epsilon(1e-13));
  CHECK(s.psi > 0.0);
  CHECK(s.psi == Approx(1.0).epsilon(1e-12));  // affine sphere: psi = 1
  CHECK(s.Q == Approx(s.grad_norm_ratio * std::sqrt(4.0 - s.f)).epsilon(1e-13));

  CHECK_THROWS_AS(gradient_sample(u, t, 1.05), std::runtime_error);  // f = 1.09 > h
  CHECK_THROWS_AS(
      gradient_sample(u, t, std::numeric_limits<double>::infinity()),
      std::invalid_argument);
}

TEST_CASE("gradient estimate scan reproduces the 1-D dense-scan values") {
  auto f = builtin_hyperboloid(1);
  // sup over Omega_h of |x|/sqrt(1+x^2) * sqrt(h - sqrt(1+x^2)), maximized
  // independently over the closed-form curve.
  const double oracle[] = {0.5426232508302803, 1.2337093354399284,
                           2.151250308791052};
  const double hs[] = {2.0, 4.0, 8.0};
  for (int i = 0; i < 3; ++i) {
    auto rep = gradient_estimate_scan(f, hs[i], 257);
    CHECK(rep.passed());
    CHECK(rep.fitted.at("supQ") == Approx(oracle[i]).epsilon(1e-2));
    CHECK(rep.fitted.at("refinement_change") < 0.2);
    CHECK(rep.sweep == std::vector<double>{hs[i]});
    CHECK(rep.measured[0] == rep.fitted.at("supQ"));
  }
}

TEST_CASE("gradient estimate scan in two dimensions") {
  SUBCASE("rotational symmetry reproduces the 1-D values") {
    auto f = builtin_hyperboloid(2);
    auto rep = gradient_estimate_scan(f, 4.0, 129);
    CHECK(rep.passed());
    CHECK(rep.fitted.at("supQ") == Approx(1.2337093354399284).epsilon(1e-2));
  }
  SUBCASE("solved disk potential gives a finite stable sup") {
    auto dom = ConvexDomain::unit_ball(2);
    auto [u, r] = solve_affine_sphere(dom, GridSpec(dom, 65));
    auto rep = gradient_estimate_scan(u, 2.0, 65);
    CHECK(rep.passed());
    CHECK(std::isfinite(rep.fitted.at("supQ")));
    CHECK(rep.fitted.at("supQ") > 0.0);
    // exact solution: Q = r sqrt(2 - 1/sqrt(1-r^2)) capped on u < -1/2
    auto again = gradient_estimate_scan(u, 2.0, 65);
    CHECK(again.fitted.at("supQ") == rep.fitted.at("supQ"));  // deterministic
  }
  SUBCASE("strictly convex analytic potential keeps Q finite") {
    auto rep = gradient_estimate_scan(builtin_quadratic(2), 1.2, 65);
    CHECK(rep.passed());
    CHECK(std::isfinite(rep.fitted.at("supQ")));
  }
}

TEST_CASE("gradient estimate scan edge heights") {
  auto f = builtin_hyperboloid(1);
  SUBCASE("height just above the minimum gives a tiny sup") {
    auto rep = gradient_estimate_scan(f, 1.0 + 1e-6, 65);
    CHECK(rep.fitted.at("supQ") < 1e-4);
    CHECK(rep.criteria.front().passed);
  }
  SUBCASE("height below the minimum is an empty sublevel set") {
    CHECK_THROWS_WITH_AS(gradient_estimate_scan(f, 0.5, 65),
                         doctest::Contains("empty"), std::runtime_error);
  }
  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(gradient_estimate_scan(f, -1.0, 65), std::invalid_argument);
    CHECK_THROWS_AS(gradient_estimate_scan(f, 2.0, 4), std::invalid_argument);
  }
}

TEST_CASE("divergence study matches the hyperboloid closed form") {
  // length along the graph ray out to X is asinh(X)
  auto f = builtin_hyperboloid(1, 2.0e5);
  auto rep = divergence_study(f, vec1(1.0), 5);
  CHECK(rep.passed());
  REQUIRE(rep.measured.size() == 6);
  for (int k = 0; k <= 5; ++k)
    CHECK(rep.measured[k] == Approx(std::asinh(std::pow(10.0, k))).epsilon(1e-6));
  CHECK(rep.fitted.at("last_increment") == Approx(std::log(10.0)).epsilon(1e-4));

  SUBCASE("two dimensions, oblique ray") {
    auto f2 = builtin_hyperboloid(2, 2.0e3);
    auto rep2 = divergence_study(f2, vec2(1.0, 1.0), 3);
    CHECK(rep2.passed());
    for (int k = 0; k <= 3; ++k)
      CHECK(rep2.measured[k] == Approx(std::asinh(std::pow(10.0, k))).epsilon(1e-6));
  }
}

TEST_CASE("divergence study on solved potentials") {
  SUBCASE("interval solution matches atanh depths") {
    auto dom = ConvexDomain::unit_ball(1);
    auto [u, r] = solve_affine_sphere(dom, GridSpec(dom, 257));
    auto rep = divergence_study(u, vec1(1.0), 5);
    CHECK(rep.passed());
    REQUIRE(rep.measured.size() == 5);
    for (int k = 1; k <= 5; ++k)
      CHECK(rep.measured[k - 1] ==
            Approx(std::atanh(1.0 - std::pow(10.0, -k))).epsilon(1e-6));
    CHECK(rep.fitted.at("min_increment") >= 0.5);
    CHECK(rep.fitted.at("last_increment") == Approx(0.5 * std::log(10.0)).epsilon(1e-3));
  }
  SUBCASE("disk solution diverges along an oblique radius") {
    auto dom = ConvexDomain::unit_ball(2);
    auto [u, r] = solve_affine_sphere(dom, GridSpec(dom, 65));
    auto rep = divergence_study(u, vec2(0.6, -0.8), 5);
    CHECK(rep.passed());
    for (int k = 1; k <= 5; ++k)
      CHECK(rep.measured[k - 1] ==
            Approx(std::atanh(1.0 - std::pow(10.0, -k))).epsilon(1e-5));
  }
  SUBCASE("square solution keeps diverging (no closed form)") {
    auto dom = ConvexDomain::square(1.0);
    auto [u, r] = solve_affine_sphere(dom, GridSpec(dom, 65));
    auto rep = divergence_study(u, vec2(1.0, 0.35), 4);
    CHECK(rep.passed());
    CHECK(rep.fitted.at("min_increment") >= 0.5);
  }
}

TEST_CASE("divergence study validation") {
  auto f = builtin_hyperboloid(1);  // default radius 10
  CHECK_THROWS_WITH_AS(divergence_study(f, vec1(1.0), 2),
                       doctest::Contains("ray leaves the chart"), std::runtime_error);
  CHECK_THROWS_AS(divergence_study(f, vec1(0.0), 3), std::invalid_argument);
  CHECK_THROWS_AS(divergence_study(f, vec1(1.0), 1), std::invalid_argument);
  auto s = PotentialField::analytic(PotentialRole::Scalar, ConvexDomain::unit_ball(1),
                                    [](const Vec& t) { return t.squaredNorm(); });
  CHECK_THROWS_AS(divergence_study(s, vec1(1.0), 3), std::invalid_argument);
}

TEST_CASE("convergence order studies") {
  SUBCASE("interval is exact") {
    auto rep = convergence_order("interval", {65, 129, 257});
    CHECK(rep.passed());
    CHECK(rep.fitted.count("exact") == 1);
    CHECK(rep.fitted.at("max_error") <= 1e-12);
  }
  SUBCASE("disk is exact") {
    auto rep = convergence_order("disk", {33, 65, 129});
    CHECK(rep.passed());
    CHECK(rep.fitted.count("exact") == 1);
  }
  SUBCASE("ellipse is exact") {
    auto rep = convergence_order("ellipse", {17, 33, 65});
    CHECK(rep.passed());
    CHECK(rep.fitted.count("exact") == 1);
  }
  SUBCASE("square fits a genuine first-order rate") {
    auto rep = convergence_order("square", {17, 33, 65}, 0.8);
    CHECK(rep.passed());
    REQUIRE(rep.fitted.count("order") == 1);
    CHECK(rep.fitted.at("order") >= 0.8);
    CHECK(rep.fitted.at("order") <= 1.7);
    CHECK(!rep.notes.empty());  // self-reference note
    const auto* mono = find_criterion(rep, "monotone");
    REQUIRE(mono != nullptr);
    CHECK(mono->passed);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(convergence_order("disk", {33, 65}), std::invalid_argument);
    CHECK_THROWS_AS(convergence_order("disk", {65, 33, 129}), std::invalid_argument);
    CHECK_THROWS_AS(convergence_order("hexagon", {17, 33, 65}), std::invalid_argument);
  }
}

TEST_CASE("equivariance suite on the ball potential") {
  auto u = builtin_ball(2);
  SUBCASE("identity map deviates by rounding only") {
    auto rep = equivariance_suite(u, {ProjectiveMap::identity(2)}, 7);
    CHECK(rep.passed());
    CHECK(rep.fitted.at("max_residual_deviation") < 1e-12);
    CHECK(rep.fitted.at("max_conormal_deviation") < 1e-12);
    CHECK(rep.fitted.at("max_metric_deviation") < 1e-12);
  }
  SUBCASE("ten random normalized affine maps stay within 1e-9") {
    auto maps = random_affine_maps(2, 10, 42);
    auto rep = equivariance_suite(u, maps, 42);
    CHECK(rep.passed());
    CHECK(rep.fitted.at("maps_checked") == 10.0);
    CHECK(rep.fitted.at("max_residual_deviation") <= 1e-9);
    CHECK(rep.fitted.at("max_conormal_deviation") <= 1e-9);
    CHECK(rep.fitted.at("max_metric_deviation") <= 1e-9);
    auto again = equivariance_suite(u, maps, 42);
    CHECK(again.measured == rep.measured);  // deterministic for a fixed seed
  }
  SUBCASE("non-affine lifts on the interval potential") {
    auto u1 = builtin_ball(1);
    Mat d(2, 2);
    d << std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0);
    Mat p(2, 2);
    p << 1.0, 0.05, 0.12, 1.0;
    auto rep = equivariance_suite(
        u1, {ProjectiveMap::normalized(d), ProjectiveMap::normalized(p)}, 3);
    CHECK(rep.passed());
    CHECK(rep.fitted.at("max_residual_deviation") <= 1e-9);
    CHECK(rep.fitted.at("max_metric_deviation") <= 1e-9);
  }
  SUBCASE("maps that leave the chart are skipped, not failed") {
    Mat bad(2, 2);
    bad << 1.0, 0.0, -1.5, 1.0;  // lambda = 1 - 1.5 t vanishes inside [-1, 1]
    auto u1 = builtin_ball(1);
    auto rep = equivariance_suite(
        u1, {ProjectiveMap::normalized(bad), ProjectiveMap::identity(1)}, 5);
    CHECK(rep.passed());
    CHECK(rep.fitted.at("maps_skipped") == 1.0);
    CHECK(rep.fitted.at("maps_checked") == 1.0);
    REQUIRE(!rep.notes.empty());
    CHECK(rep.notes.front().find("skipped") != std::string::npos);
    CHECK_THROWS_WITH_AS(
        equivariance_suite(u1, {ProjectiveMap::normalized(bad)}, 5),
        doctest::Contains("nothing was checked"), std::runtime_error);
  }
  SUBCASE("validation") {
    Mat flip(3, 3);
    flip << 1, 0, 0, 0, -1, 0, 0, 0, 1;  // det = -1: orientation reversing
    CHECK_THROWS_AS(equivariance_suite(u, {ProjectiveMap::normalized(flip)}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(equivariance_suite(u, {}, 1), std::invalid_argument);
    auto f = builtin_hyperboloid(2);
    CHECK_THROWS_AS(equivariance_suite(f, {ProjectiveMap::identity(2)}, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("random affine map batches") {
  auto a = random_affine_maps(2, 6, 99);
  auto b = random_affine_maps(2, 6, 99);
  auto c = random_affine_maps(2, 6, 100);
  REQUIRE(a.size() == 6);
  bool all_equal = true, any_diff_seed = false;
  for (int i = 0; i < 6; ++i) {
    CHECK(std::abs(std::abs(a[i].matrix().determinant()) - 1.0) < 1e-12);
    all_equal = all_equal && (a[i].matrix() - b[i].matrix()).norm() == 0.0;
    any_diff_seed = any_diff_seed || (a[i].matrix() - c[i].matrix()).norm() > 1e-12;
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);
  CHECK_THROWS_AS(random_affine_maps(3, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(random_affine_maps(2, 0, 1), std::invalid_argument);
}
