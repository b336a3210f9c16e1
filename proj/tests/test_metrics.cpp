#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "finsler/error.hpp"
#include "finsler/metrics.hpp"

using namespace finsler;

namespace {

constexpr double kF0At1 = 0.648054273663885399574977353226;
constexpr double kF0AtHalf = 0.886818883970073908658897797783;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

CotangentPoint random_point(std::mt19937_64& rng, double x2_lim) {
  const double t = uniform(rng, 0.0, kTwoPi);
  const double r = uniform(rng, 0.1, 3.0);
  return {uniform(rng, -10.0, 10.0), uniform(rng, -x2_lim, x2_lim), r * std::cos(t), r * std::sin(t)};
}

DualMetric sphere_katok(double alpha) {
  return build_katok_family(RotationalProfile::round_sphere(), CutoffPair(0.5, 1.5, 2.0), alpha);
}

}  // namespace

TEST_CASE("H0 and H1") {
  const auto f = RotationalProfile::round_sphere();
  CHECK(eval_H0(f, {0, 0, 1, 0}) == 1.0);
  CHECK(eval_H0(f, {0, 1, 0.3, 0.4}) == doctest::Approx(0.5 / kF0At1).epsilon(1e-15));
  CHECK(eval_H0(f, {0, 1, 0.3, 0.4}) == doctest::Approx(0.771540317407621889).epsilon(1e-15));
  CHECK_THROWS_AS(eval_H0(f, {0, 1, 0, 0}), Error);
  CHECK(eval_H1({0, 0, 1, 0}) == 1.0);
  CHECK(eval_H1({0, 0, 0, 5}) == 0.0);
}

TEST_CASE("cone membership") {
  const auto f = RotationalProfile::round_sphere();
  CHECK(cone_membership(f, 0.5, {0, 0, 1, 0}));
  CHECK_FALSE(cone_membership(f, 0.5, {0, 0, 0, 1}));
  CHECK_FALSE(cone_membership(f, 0.5, {0, 0.3, 0, 1}));
  // On |x2| = a the fiber part of the cone is the single ray +dx1.
  CHECK(cone_membership(f, 0.5, {0, 0.5, 2.0, 0}));
  CHECK(cone_membership(f, 0.5, {0, -0.5, 0.1, 0}));
  CHECK_FALSE(cone_membership(f, 0.5, {0, 0.5, 1.0, 1e-6}));
  CHECK_FALSE(cone_membership(f, 0.5, {0, 0.5, -1.0, 0}));
  CHECK(eval_f0(0.5) == doctest::Approx(kF0AtHalf).epsilon(1e-15));
}

TEST_CASE("homogeneity, Euler identity and evenness on random samples") {
  std::mt19937_64 rng(11);
  const auto sphere = RotationalProfile::round_sphere();
  const auto torus = make_spliced_profile(4.0, 0.5);
  const std::vector<DualMetric> metrics{
      DualMetric::rotational(sphere), DualMetric::rotational(torus), sphere_katok(kDefaultAlpha),
      build_katok_family(torus, CutoffPair(0.3, 1.4, 1.5), kDefaultAlpha), reversibilize(sphere_katok(kDefaultAlpha))};
  for (const auto& m : metrics) {
    for (int i = 0; i < 1000; ++i) {
      const auto p = random_point(rng, 3.0);
      const double h = m(p);
      REQUIRE(h > 0.0);
      const double a = uniform(rng, 0.1, 10.0);
      REQUIRE(std::abs(m({p.x1, p.x2, a * p.xi1, a * p.xi2}) - a * h) <= 1e-10 * a * h);
      const auto g = m.gradient(p);
      REQUIRE(std::abs(p.xi1 * g.xi1 + p.xi2 * g.xi2 - h) <= 1e-10 * h);
      REQUIRE(g.x1 == 0.0);
    }
  }
  const auto& rev = metrics.back();
  for (int i = 0; i < 1000; ++i) {
    const auto p = random_point(rng, 3.0);
    REQUIRE(std::abs(rev(p) - rev({p.x1, p.x2, -p.xi1, -p.xi2})) <= 1e-12 * rev(p));
  }
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(5);
  const auto m = katok_unchecked(RotationalProfile::round_sphere(), CutoffPair(0.5, 1.5, 2.0), 0.3);
  for (int i = 0; i < 500; ++i) {
    auto p = random_point(rng, 2.2);
    if (std::abs(std::abs(p.x2) - 2.0) < 1e-3) continue;
    const auto g = m.gradient(p);
    const double d = 1e-6;
    auto fd = [&](auto shift) {
      CotangentPoint a = p, b = p;
      shift(a, d);
      shift(b, -d);
      return (m(a) - m(b)) / (2 * d);
    };
    CHECK(g.x2 == doctest::Approx(fd([](CotangentPoint& q, double e) { q.x2 += e; })).epsilon(1e-5).scale(1e-6));
    CHECK(g.xi1 == doctest::Approx(fd([](CotangentPoint& q, double e) { q.xi1 += e; })).epsilon(1e-5).scale(1e-6));
    CHECK(g.xi2 == doctest::Approx(fd([](CotangentPoint& q, double e) { q.xi2 += e; })).epsilon(1e-5).scale(1e-6));
  }
}

TEST_CASE("Katok family locality") {
  std::mt19937_64 rng(3);
  const auto f = RotationalProfile::round_sphere();
  const CutoffPair c(0.75, 1.5, 2.0);
  const double alpha = kDefaultAlpha;
  const auto m = build_katok_family(f, c, alpha);
  CHECK(build_katok_family(f, c, 0.0)({0, 0.2, 1, 0.3}) == eval_H0(f, {0, 0.2, 1, 0.3}));
  int inside = 0;
  int outside = 0;
  while (inside < 1000 || outside < 1000) {
    const auto p = random_point(rng, 3.0);
    if (cone_membership(f, c.a0, p) && inside < 1000) {
      ++inside;
      REQUIRE(std::abs(m(p) - (eval_H0(f, p) + alpha * p.xi1)) <= 1e-14);
    } else if (!cone_membership(f, c.a1, p) && outside < 1000) {
      ++outside;
      REQUIRE(m(p) - eval_H0(f, p) == 0.0);
    }
  }
  for (int i = 0; i < 1000; ++i) {
    const double x2 = uniform(rng, c.a1 + 1e-3, c.b + 1.0) * (i % 2 ? 1 : -1);
    const double t = uniform(rng, 0.0, kTwoPi);
    const CotangentPoint p{0, x2, std::cos(t), std::sin(t)};
    REQUIRE(std::abs(m(p) - eval_H0(f, p)) <= 1e-12);
  }
}

TEST_CASE("Katok family on the torus is periodic in x2") {
  const auto torus = make_spliced_profile(4.0, 0.5);
  const auto m = build_katok_family(torus, CutoffPair(0.3, 1.4, 1.5), kDefaultAlpha);
  std::mt19937_64 rng(12);
  for (int i = 0; i < 200; ++i) {
    const double x2 = uniform(rng, -2.0, 2.0);
    const double t = uniform(rng, -0.5, 0.5);
    const CotangentPoint p{0.3, x2, std::cos(t), std::sin(t)};
    for (double shift : {-8.0, -4.0, 4.0, 12.0}) {
      const CotangentPoint q{p.x1, p.x2 + shift, p.xi1, p.xi2};
      REQUIRE(m(q) == doctest::Approx(m(p)).epsilon(1e-14));
      REQUIRE(m.gradient(q).xi1 == doctest::Approx(m.gradient(p).xi1).epsilon(1e-13));
      REQUIRE(cone_membership(torus, 0.3, q) == cone_membership(torus, 0.3, p));
    }
  }
  // Next to x2 = L the perturbation is active, as it is next to 0.
  CHECK(m({0, 4.0 - 1e-3, 1, 0}) == doctest::Approx(1.0 + kDefaultAlpha).epsilon(1e-6));
}

TEST_CASE("Katok family needs f = f0 on [-b, b]") {
  CHECK_THROWS_AS(build_katok_family(make_spliced_profile(4.0, 0.5), CutoffPair(0.75, 1.4, 1.8), 0.01), Error);
}

TEST_CASE("fiber convexity") {
  const auto f = RotationalProfile::round_sphere();
  const auto samples = fiber_sample_grid(-2.0, 2.0, 9, 72);
  const auto r0 = fiber_convexity_check(DualMetric::rotational(f), samples);
  CHECK(r0.passed);
  // The Riemannian Hessian of H0^2/2 is I / f^2, smallest at x2 = 0.
  CHECK(r0.min_eigenvalue == doctest::Approx(1.0).epsilon(1e-5));
  const auto ra = fiber_convexity_check(sphere_katok(kDefaultAlpha), fiber_sample_grid(-1.5, 1.5, 31, 720));
  CHECK(ra.passed);
  const double crit = critical_alpha(f, CutoffPair(0.5, 1.5, 2.0), fiber_sample_grid(-1.5, 1.5, 16, 360));
  CHECK(crit > kDefaultAlpha);
  CHECK_THROWS_AS(build_katok_family(f, CutoffPair(0.5, 1.5, 2.0), 3.9), Error);
}

TEST_CASE("reversibilization") {
  const auto h = sphere_katok(kDefaultAlpha);
  const auto r = reversibilize(h);
  CHECK(r.kind() == DualMetric::Kind::Reversibilized);
  CHECK(r({0, 0.1, 0.7, 0.2}) == h({0, 0.1, 0.7, 0.2}));
  const auto flat = reversibilize(sphere_katok(0.0));
  CHECK(flat({0, 0.3, -0.7, 0.2}) == sphere_katok(0.0)({0, 0.3, -0.7, 0.2}));
  CHECK_THROWS_AS(reversibilize(DualMetric::rotational(RotationalProfile::round_sphere())), Error);
}

TEST_CASE("reversibilized branches share their jet across the seam") {
  const auto m = reversibilize(build_katok_family(RotationalProfile::round_sphere(), CutoffPair(0.5, 1.5, 2.0), kDefaultAlpha));
  const auto r = seam_jet_check(m);
  CHECK(r.max_mismatch <= 1e-5);
  const auto torus = make_spliced_profile(4.0, 0.5);
  CHECK(seam_jet_check(reversibilize(build_katok_family(torus, CutoffPair(0.3, 1.4, 1.5), kDefaultAlpha))).max_mismatch <= 1e-5);
  CHECK_THROWS_AS(seam_jet_check(DualMetric::rotational(torus)), Error);
}

TEST_CASE("Legendre velocity") {
  const auto f = RotationalProfile::round_sphere();
  const auto v = legendre_velocity(DualMetric::rotational(f), {0, 0, 1, 0});
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 0.0);
  const auto m = sphere_katok(kDefaultAlpha);
  const CotangentPoint p{0, 0.2, 1.0, 0.1};
  REQUIRE(cone_membership(f, 0.5, p));
  const auto v0 = legendre_velocity(DualMetric::rotational(f), p);
  const auto va = legendre_velocity(m, p);
  CHECK(va[0] == doctest::Approx(v0[0] + kDefaultAlpha).epsilon(1e-15));
  CHECK(va[1] == doctest::Approx(v0[1]).epsilon(1e-15));
}

TEST_CASE("metric JSON") {
  const auto m = reversibilize(sphere_katok(kDefaultAlpha));
  const auto j = m.to_json();
  CHECK(j["reversible"] == true);
  const auto back = DualMetric::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back({0, 0.3, -0.5, 0.4}) == m({0, 0.3, -0.5, 0.4}));
  CHECK_THROWS_AS(DualMetric::from_json({{"kind", "katok"}, {"a0", 0.5}}), Error);
}

TEST_CASE("domain reduction and distance") {
  const Domain d{kTwoPi, 4.0};
  const auto r = d.reduce({-0.5, 9.0, 1, 2});
  CHECK(r.x1 == doctest::Approx(kTwoPi - 0.5));
  CHECK(r.x2 == doctest::Approx(1.0));
  CHECK(d.distance({0.01, 3.99, 0, 0}, {kTwoPi - 0.01, 0.01, 0, 0}) == doctest::Approx(std::hypot(0.02, 0.02)));
}
