#include "doctest.h"

#include <asphere/legendre.hpp>

#include <cmath>
#include <random>

using namespace asphere;

TEST_CASE("quadratic is self-dual") {
  auto f = builtin_polynomial(2, {0.0, 0.5}, 1.0);  // |x|^2/2
  auto pair = legendre_transform(f);
  for (double r : {0.0, 0.3, 0.7}) {
    Vec x = vec2(r, -0.5 * r);
    Vec y = pair.forward(x);
    CHECK((y - x).norm() < 1e-12);
    if (pair.dual().domain().contains(y))
      CHECK(pair.dual().value_at(y) == doctest::Approx(0.5 * y.squaredNorm()).epsilon(1e-9));
  }
}

TEST_CASE("hyperboloid dual is the lower unit hemisphere") {
  auto f = builtin_hyperboloid(2, 10.0);
  auto pair = legendre_transform(f);
  for (double r : {0.0, 0.25, 0.6, 0.9}) {
    Vec x = vec2(r / std::sqrt(1.0 - r * r), 0.0);  // gradient image is y = (r, 0)
    Vec y = pair.forward(x);
    CHECK(y[0] == doctest::Approx(r).epsilon(1e-12));
    const double expect = -std::sqrt(1.0 - r * r);
    CHECK(pair.dual().value_at(y) == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("double transform returns the quartic") {
  auto f = builtin_polynomial(2, {0.0, 0.5, 0.25}, 1.0);  // |x|^2/2 + |x|^4/4
  auto pair = legendre_transform(f);
  auto back = legendre_transform(pair.dual());
  // the dual of the dual lives back on the x-chart and must reproduce f
  double worst = 0.0;
  int checked = 0;
  for (double r : {0.1, 0.35, 0.6, 0.8}) {
    for (double a = 0.0; a < 6.0; a += 0.7) {
      Vec x = vec2(r * std::cos(a), r * std::sin(a));
      if (!back.dual().domain().contains(x, 1e-12)) continue;
      worst = std::max(worst, std::abs(back.dual().value_at(x) - f.value_at(x)));
      ++checked;
    }
  }
  CHECK(checked > 20);
  CHECK(worst < 1e-10);
}

TEST_CASE("inversion round trip") {
  auto f = builtin_polynomial(1, {0.0, 0.5, 0.25}, 1.0);
  auto pair = legendre_transform(f);
  for (double x0 : {-0.8, -0.2, 0.5, 0.9}) {
    Vec y = pair.forward(vec1(x0));
    Vec x = pair.inverse(y);
    CHECK(x[0] == doctest::Approx(x0).epsilon(1e-11));
  }
}

TEST_CASE("gradient identity defect vanishes analytically") {
  auto f = builtin_hyperboloid(2, 10.0);
  auto pair = legendre_transform(f);
  CHECK(gradient_identity_defect(pair, vec2(1.0, 0.0)).norm() < 1e-10);
  CHECK(gradient_identity_defect(pair, vec2(0.3, -1.2)).norm() < 1e-10);

  auto q = legendre_transform(builtin_polynomial(2, {0.0, 0.5}, 1.0));
  CHECK(gradient_identity_defect(q, vec2(0.4, 0.1)).norm() < 1e-12);
}

TEST_CASE("gradient identity defect is second order on grids") {
  auto sample = [](int nodes) {
    GridSpec g(ConvexDomain::square(1.0), nodes);
    Vec vals(g.interior_count());
    for (int k = 0; k < g.interior_count(); ++k) {
      const Vec p = g.node_point(g.interior()[k]);
      vals[k] = 0.5 * p.squaredNorm() + 0.25 * p.squaredNorm() * p.squaredNorm();
    }
    return PotentialField::grid(PotentialRole::GraphF, g, vals, false);
  };
  auto defect_of = [&](int nodes) {
    auto pair = legendre_transform(sample(nodes));
    double worst = 0.0;
    for (double r : {0.1, 0.3, 0.5}) {
      for (double a = 0.2; a < 6.0; a += 1.1) {
        Vec x = vec2(r * std::cos(a), r * std::sin(a));
        Vec y = pair.primal().gradient_at(x);
        if (!pair.dual().domain().contains(y, 1e-9)) continue;
        worst = std::max(worst, gradient_identity_defect(pair, x).norm());
      }
    }
    return worst;
  };
  const double d33 = defect_of(33);
  const double d65 = defect_of(65);
  CHECK(d65 < d33);          // decreasing under refinement
  CHECK(d65 < 0.6 * d33);    // at a roughly second-order rate
}

TEST_CASE("duality gap") {
  SUBCASE("quadratic gap equals |x|^2") {
    auto pair = legendre_transform(builtin_polynomial(2, {0.0, 0.5}, 1.0));
    Vec x = vec2(0.5, -0.3);
    CHECK(duality_gap(pair, x) == doctest::Approx(x.squaredNorm()).epsilon(1e-10));
    CHECK(duality_gap(pair, vec2(0.0, 0.0)) == doctest::Approx(0.0));
  }

  SUBCASE("hyperboloid gap closed form") {
    auto pair = legendre_transform(builtin_hyperboloid(1, 10.0));
    const double x = 1.7;
    CHECK(duality_gap(pair, vec1(x)) ==
          doctest::Approx(x * x / std::sqrt(1.0 + x * x)).epsilon(1e-10));
  }

  SUBCASE("shifted minimum rejected") {
    auto f = PotentialField::analytic(
        PotentialRole::GraphF, ConvexDomain::unit_ball(2),
        [](const Vec& x) { return 0.5 * (x - vec2(0.3, 0.0)).squaredNorm(); },
        [](const Vec& x) { return Vec(x - vec2(0.3, 0.0)); },
        [](const Vec&) { return Mat(Mat::Identity(2, 2)); });
    auto pair = legendre_transform(f);
    CHECK_THROWS_WITH_AS(duality_gap(pair, vec2(0.2, 0.2)),
                         doctest::Contains("origin"), std::exception);
  }

  SUBCASE("nonnegative over random samples on several potentials") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<PotentialField> fields;
    fields.push_back(builtin_polynomial(2, {0.0, 0.5}, 1.0));
    fields.push_back(builtin_polynomial(2, {0.0, 0.5, 0.25}, 1.0));
    fields.push_back(builtin_hyperboloid(2, 4.0));
    fields.push_back(builtin_polynomial(1, {0.0, 0.35, 0.1, 0.05}, 1.0));
    fields.push_back(builtin_hyperboloid(1, 6.0));
    for (const auto& f : fields) {
      auto pair = legendre_transform(f);
      const double R = 0.85 * f.domain().scale();
      double worst = 0.0;
      for (int s = 0; s < 2000; ++s) {
        Vec x(f.dim());
        for (int a = 0; a < f.dim(); ++a) x[a] = R * unif(rng);
        if (!f.domain().contains(x, 1e-6)) continue;
        worst = std::min(worst, duality_gap(pair, x));
      }
      CHECK(worst >= -1e-12);
    }
  }
}

TEST_CASE("gradient map injectivity margin") {
  auto f = builtin_polynomial(2, {0.0, 0.5, 0.25}, 1.0);
  // min Hessian eigenvalue over the domain is 1 (at the origin)
  const double lam_min = 1.0;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(-0.9, 0.9);
  for (int s = 0; s < 10000; ++s) {
    Vec x = vec2(unif(rng), unif(rng));
    Vec xp = vec2(unif(rng), unif(rng));
    if (!f.domain().contains(x, 1e-6) || !f.domain().contains(xp, 1e-6)) continue;
    const double lhs = (f.gradient_at(x) - f.gradient_at(xp)).norm();
    CHECK(lhs >= lam_min * (x - xp).norm() - 1e-12);
  }
}

TEST_CASE("convexity failures are rejected") {
  auto bad = PotentialField::analytic(
      PotentialRole::GraphF, ConvexDomain::unit_ball(1),
      [](const Vec& x) { return -0.5 * x[0] * x[0]; },
      [](const Vec& x) { return Vec(-x); },
      [](const Vec&) { return Mat(-Mat::Identity(1, 1)); });
  CHECK_THROWS_WITH_AS(legendre_transform(bad), doctest::Contains("convexity"),
                       std::exception);
}
