#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "finsler/error.hpp"
#include "finsler/flow.hpp"
#include "oracles.hpp"

using namespace finsler;

namespace {

// -|xi| f0'(1) / f0(1)^2 at xi = (0.3, 0.4), to 30 digits (mpmath).
constexpr double kXi2DotAt1 = -0.587600596821900728441190925298;

const RotationalProfile kSphere = RotationalProfile::round_sphere();
const CutoffPair kSphereCut(0.5, 1.5, 2.0);

double max_abs_diff(const CotangentPoint& a, const CotangentPoint& b) {
  return std::max({std::abs(a.x1 - b.x1), std::abs(a.x2 - b.x2), std::abs(a.xi1 - b.xi1), std::abs(a.xi2 - b.xi2)});
}

CotangentPoint unit_covector(double x1, double x2, double angle, const RotationalProfile& f) {
  const double s = f.value(x2);
  return {x1, x2, s * std::cos(angle), s * std::sin(angle)};
}

}  // namespace

TEST_CASE("Hamiltonian vector field") {
  const auto h0 = DualMetric::rotational(kSphere);
  const auto v = hamiltonian_vector_field(h0, {0, 0, 1, 0});
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 0.0);
  CHECK(v[2] == 0.0);
  CHECK(v[3] == 0.0);
  const auto a = hamiltonian_vector_field(h0, {0, 0.7, 0.2, -0.5});
  for (double x1 : {1.0, 2.0}) CHECK(hamiltonian_vector_field(h0, {x1, 0.7, 0.2, -0.5}) == a);
  const auto w = hamiltonian_vector_field(h0, {0, 1, 0.3, 0.4});
  CHECK(w[3] == doctest::Approx(kXi2DotAt1).epsilon(1e-14));
  CHECK(w[2] == 0.0);
  CHECK_THROWS_AS(hamiltonian_vector_field(h0, {0, 1, 0, 0}), Error);
}

TEST_CASE("equator orbit") {
  const auto h0 = DualMetric::rotational(kSphere);
  const auto trace = integrate_orbit(h0, {0, 0, 1, 0}, 10.0);
  const auto& end = trace.states.back();
  CHECK(trace.times.back() == 10.0);
  CHECK(std::abs(end.x1 - std::fmod(10.0, kTwoPi)) <= 1e-8);
  CHECK(std::abs(end.x2) <= 1e-8);
  CHECK(std::abs(end.xi1 - 1.0) <= 1e-8);
  CHECK(std::abs(end.xi2) <= 1e-8);
  CHECK(trace.size() == 101);
  for (std::size_t i = 1; i < trace.size(); ++i) REQUIRE(trace.times[i] > trace.times[i - 1]);
}

TEST_CASE("H0 flow matches the great-circle oracle") {
  const auto h0 = DualMetric::rotational(kSphere);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const auto p = unit_covector(kTwoPi * u(rng), -1.5 + 3.0 * u(rng), kTwoPi * u(rng), kSphere);
    const double t = 1.0 + 6.0 * u(rng);
    const auto got = integrate_state(h0, p, t);
    const auto want = oracle::great_circle(p, t);
    CHECK(max_abs_diff(got, want) <= 1e-8);
  }
}

TEST_CASE("conservation over time 100") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto torus = make_spliced_profile(4.0, 0.5);
  const std::vector<DualMetric> metrics{DualMetric::rotational(kSphere), DualMetric::rotational(torus),
                                        build_katok_family(kSphere, kSphereCut, kDefaultAlpha),
                                        build_katok_family(torus, CutoffPair(0.3, 1.4, 1.5), kDefaultAlpha)};
  for (const auto& m : metrics) {
    for (int i = 0; i < 3; ++i) {
      const auto p = unit_covector(kTwoPi * u(rng), -1.0 + 2.0 * u(rng), -1.2 + 2.4 * u(rng), *m.profile());
      const auto trace = integrate_orbit(m, p, 100.0);
      CHECK(trace.max_drift_H <= 1e-8);
      CHECK(trace.max_drift_H1 <= 1e-8);
    }
  }
}

TEST_CASE("meridian orbit reaches the pole cap") {
  const auto h0 = DualMetric::rotational(kSphere);
  try {
    integrate_orbit(h0, {0, 0, 0, 1}, kPi / 2 + 0.1);
    FAIL("expected PoleProximity");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PoleProximity);
  }
  // Just short of the pole distance pi/2 the run completes.
  const auto trace = integrate_orbit(h0, {0, 0, 0, 1}, kPi / 2 - 0.01);
  CHECK(trace.states.back().x2 == doctest::Approx(std::asinh(std::tan(kPi / 2 - 0.01))).epsilon(1e-8));
}

TEST_CASE("time reversal") {
  const auto m = build_katok_family(kSphere, kSphereCut, kDefaultAlpha);
  const CotangentPoint p{0.3, 0.2, 0.6, 0.5};
  const auto fwd = integrate_state(m, p, 30.0);
  const auto back = integrate_state(m, fwd, -30.0);
  CHECK(max_abs_diff(back, p) <= 1e-7);
}

TEST_CASE("reversibilized dynamics are reversible") {
  const auto m = reversibilize(build_katok_family(kSphere, kSphereCut, kDefaultAlpha));
  for (const CotangentPoint p : {CotangentPoint{0.1, 0.3, 0.8, 0.2}, CotangentPoint{1.0, -0.4, -0.7, 0.3}}) {
    auto q = integrate_state(m, p, 7.0);
    q.xi1 = -q.xi1;
    q.xi2 = -q.xi2;
    auto r = integrate_state(m, q, 7.0);
    r.xi1 = -r.xi1;
    r.xi2 = -r.xi2;
    CHECK(max_abs_diff(r, p) <= 1e-6);
  }
}

TEST_CASE("commuting flows") {
  const IntegratorConfig cfg;
  const CotangentPoint p{0.0, 0.1, 0.95, 0.12};
  REQUIRE(cone_membership(kSphere, kSphereCut.a0, p));
  const auto h0 = DualMetric::rotational(kSphere);
  CHECK(max_abs_diff(compose_commuting_flows(kSphere, kSphereCut, 0.0, p, 3.0), integrate_state(h0, p, 3.0)) <=
        1e-8);
  const auto shift = integrate_state(DualMetric::angular(), p, 0.25);
  CHECK(shift.x1 == 0.25);
  CHECK(shift.x2 == p.x2);
  CHECK(shift.xi1 == p.xi1);
  CHECK(shift.xi2 == p.xi2);
  const auto m = build_katok_family(kSphere, kSphereCut, kDefaultAlpha);
  const auto direct = integrate_state(m, p, kTwoPi);
  const auto composed = compose_commuting_flows(kSphere, kSphereCut, kDefaultAlpha, p, kTwoPi);
  CHECK(max_abs_diff(direct, composed) <= 1e-6);
  CHECK_THROWS_AS(compose_commuting_flows(kSphere, kSphereCut, kDefaultAlpha, {0, 0.1, 0.1, 1.0}, 1.0), Error);
}

TEST_CASE("periodicity") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<CotangentPoint> samples;
  while (samples.size() < 10) {
    const auto p = unit_covector(kTwoPi * u(rng), -0.5 + u(rng), -1.0 + 2.0 * u(rng), kSphere);
    if (cone_membership(kSphere, 0.5, p)) samples.push_back(p);
  }
  CHECK(check_periodicity(DualMetric::rotational(kSphere), samples, kTwoPi).max_distance <= 1e-6);
  std::vector<CotangentPoint> shifts;
  for (int i = 0; i < 5; ++i) shifts.push_back({0.3 * i, 0.1 * i, 1.0, 0.2});
  CHECK(check_periodicity(DualMetric::angular(), shifts, kTwoPi).max_distance == 0.0);
  const auto torus = make_spliced_profile(4.0, 0.5);
  const double c = 0.5 * torus.minimum();
  const CotangentPoint rotating{0.0, 0.0, c, std::sqrt(1.0 - c * c)};
  CHECK(check_periodicity(DualMetric::rotational(torus), {rotating}, kTwoPi).max_distance > 0.05);
}

TEST_CASE("lift to cover") {
  const auto h0 = DualMetric::rotational(kSphere);
  const auto trace = integrate_orbit(h0, {0, 0, 1, 0}, 4 * kPi);
  const auto lift = lift_to_cover(trace);
  CHECK(lift.back()[0] == doctest::Approx(4 * kPi).epsilon(1e-12));
  CHECK(std::abs(lift.back()[1]) <= 1e-12);

  const auto torus = make_spliced_profile(4.0, 0.5);
  const auto m = build_katok_family(torus, CutoffPair(0.3, 1.4, 1.5), kDefaultAlpha);
  const CotangentPoint p{0.0, 0.0, 0.8, 0.6};
  const auto t2 = integrate_orbit(m, p, 200.0);
  const auto l2 = lift_to_cover(t2);
  const Domain d = Domain::of(torus);
  const double x_star = oracle::turning_point(p.xi1 / eval_H0(torus, p));
  double worst = 0.0;
  for (std::size_t i = 0; i < l2.size(); ++i) {
    const auto r = d.reduce({l2[i][0], l2[i][1], 0, 0});
    worst = std::max({worst, std::abs(r.x1 - t2.states[i].x1), std::abs(r.x2 - t2.states[i].x2)});
    REQUIRE(std::abs(l2[i][1]) <= x_star + 1e-6);
    REQUIRE(std::abs(l2[i][0] - t2.lifted_base[i][0]) <= 1e-9);
  }
  CHECK(worst <= 1e-12);

  OrbitTrace bad = trace;
  bad.lifted_base[1][0] += 10.0;
  CHECK_THROWS_AS(lift_to_cover(bad), Error);
}

TEST_CASE("projection keeps H on its level") {
  IntegratorConfig cfg;
  cfg.projection = true;
  cfg.rel_tol = cfg.abs_tol = 1e-10;
  const auto m = DualMetric::rotational(make_spliced_profile(4.0, 0.5));
  const auto trace = integrate_orbit(m, {0, 0.2, 0.3, 0.9}, 20.0, cfg);
  CHECK(trace.max_drift_H <= 1e-14);
  CHECK(trace.times.back() == 20.0);
}

TEST_CASE("integrator config") {
  IntegratorConfig c;
  CHECK(IntegratorConfig::from_json(c.to_json()).to_json() == c.to_json());
  CHECK_THROWS_AS(IntegratorConfig::from_json({{"rel_tol", -1.0}}), Error);
  CHECK_THROWS_AS(IntegratorConfig::from_json({{"rtol", 1.0}}), Error);
}

TEST_CASE("orbit CSV") {
  const auto h0 = DualMetric::rotational(kSphere);
  const auto trace = integrate_orbit(h0, {0, 0, 1, 0}, 0.3);
  std::ostringstream out;
  write_orbit_csv(out, trace, h0);
  const auto s = out.str();
  CHECK(s.rfind("t,x1,x2,xi1,xi2,lift_x1,lift_x2,H,H1\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 5);
}
