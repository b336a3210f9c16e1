#include <doctest.h>

#include <cmath>

#include "finsler/error.hpp"
#include "finsler/profiles.hpp"

using namespace finsler;

namespace {
// f0(1) and f0(0.5) to 30 digits (mpmath, 2e^t / (1 + e^{2t})).
constexpr double kF0At1 = 0.648054273663885399574977353226;
constexpr double kF0AtHalf = 0.886818883970073908658897797783;
}  // namespace

TEST_CASE("f0 closed form") {
  CHECK(eval_f0(0.0) == 1.0);
  CHECK(eval_f0(1.0) == doctest::Approx(kF0At1).epsilon(1e-15));
  CHECK(eval_f0(0.5) == doctest::Approx(kF0AtHalf).epsilon(1e-15));
  for (double t : {0.5, 1.0, 3.0}) CHECK(eval_f0(-t) == eval_f0(t));
  CHECK(eval_f0(800.0) >= 0.0);
  CHECK(std::isfinite(eval_f0(-800.0)));
}

TEST_CASE("f0 is strictly decreasing on [0, 20] with maximum 1") {
  double prev = eval_f0(0.0);
  CHECK(prev == 1.0);
  for (int i = 1; i <= 2000; ++i) {
    const double v = eval_f0(20.0 * i / 2000);
    REQUIRE(v < prev);
    prev = v;
  }
}

TEST_CASE("f0 derivative matches central differences") {
  for (double t : {-2.0, -0.3, 0.0, 0.7, 4.0}) {
    const double d = 1e-6;
    CHECK(eval_f0_derivative(t) == doctest::Approx((eval_f0(t + d) - eval_f0(t - d)) / (2 * d)).epsilon(1e-8));
  }
}

TEST_CASE("h is the latitude map") {
  CHECK(eval_h(0.0) == 0.0);
  for (double t : {-1.0, 0.0, 2.0}) {
    const double d = 1e-5;
    CHECK(std::abs((eval_h(t + d) - eval_h(t - d)) / (2 * d) - eval_f0(t)) <= 1e-8);
  }
  for (double t : {0.0, 1.0, 5.0}) CHECK(std::abs(std::cos(eval_h(t)) - eval_f0(t)) <= 1e-12);
  for (int i = 0; i <= 100; ++i) {
    const double t = -10.0 + 0.2 * i;
    CHECK(std::abs(eval_h(-t) + eval_h(t)) <= 1e-12);
    CHECK(std::abs(eval_h(t) - (2.0 * std::atan(std::exp(t)) - kPi / 2)) <= 1e-14);
  }
}

TEST_CASE("f0_inverse") {
  CHECK(f0_inverse(1.0) == 0.0);
  CHECK(f0_inverse(kF0At1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(f0_inverse(0.0), Error);
  CHECK_THROWS_AS(f0_inverse(1.5), Error);
}

TEST_CASE("spliced profile") {
  const auto f = make_spliced_profile(4.0, 0.25);
  CHECK(f.value(0.0) == 1.0);
  CHECK(f.value(1.0) == eval_f0(1.0));
  CHECK(f.value(2.0) == doctest::Approx(f.value(-2.0)).epsilon(1e-14));
  for (int i = 0; i <= 400; ++i) {
    const double x = -1.75 + 3.5 * i / 400;
    REQUIRE(f.value(x) == eval_f0(x));
  }
  for (int i = 0; i < 10000; ++i) {
    const double x = -6.0 + 12.0 * i / 10000;
    REQUIRE(f.value(x) > 0.0);
    REQUIRE(std::abs(f.value(x + 4.0) - f.value(x)) <= 1e-12);
    REQUIRE(std::abs(f.derivative(x + 4.0) - f.derivative(x)) <= 1e-12);
  }
  // Dense-grid minimum oracle.
  double m = 1.0;
  for (int i = 0; i <= 200000; ++i) m = std::min(m, f.value(4.0 * i / 200000));
  CHECK(f.minimum() <= m + 1e-15);
  CHECK(f.minimum() >= m - 1e-9);
  CHECK(eval_f0(2.0 - 0.25) >= f.minimum());
  CHECK(f.minimum() > 0.0);
}

TEST_CASE("spliced profile derivative matches central differences across the bridge") {
  const auto f = make_spliced_profile(4.0, 0.5);
  for (int i = 0; i <= 40; ++i) {
    const double x = 1.4 + 1.2 * i / 40;
    const double d = 1e-6;
    CHECK(f.derivative(x) == doctest::Approx((f.value(x + d) - f.value(x - d)) / (2 * d)).epsilon(1e-6).scale(1e-8));
  }
}

TEST_CASE("spliced profile rejects bad splice widths") {
  CHECK_THROWS_AS(make_spliced_profile(4.0, 0.0), Error);
  CHECK_THROWS_AS(make_spliced_profile(4.0, 1.0), Error);
  try {
    make_spliced_profile(4.0, -1.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidSplice);
  }
}

TEST_CASE("profile JSON round trip") {
  for (const auto& f : {RotationalProfile::round_sphere(), make_spliced_profile(4.0, 0.25),
                        RotationalProfile::periodic(3.0, 1.0, 0.2)}) {
    const auto g = RotationalProfile::from_json(f.to_json());
    CHECK(g.to_json() == f.to_json());
    CHECK(g.value(0.3) == f.value(0.3));
  }
  CHECK_THROWS_AS(RotationalProfile::from_json({{"kind", "cone"}}), Error);
}

TEST_CASE("eta step") {
  const auto eta = make_eta(0.5, 1.0);
  CHECK(eta(eval_f0(1.0)) == 0.0);
  CHECK(eta(eval_f0(0.5)) == 1.0);
  CHECK(eta(0.0) == 0.0);
  const double mid = eta(0.5 * (eval_f0(1.0) + eval_f0(0.5)));
  CHECK(mid > 0.0);
  CHECK(mid < 1.0);
  double prev = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double t = 0.5 + 0.6 * i / 1000;
    const double v = eta(t);
    CHECK(v >= prev);
    CHECK(eta.derivative(t) >= 0.0);
    prev = v;
    if (t <= eval_f0(1.0)) CHECK(v == 0.0);
    if (t >= eval_f0(0.5)) CHECK(v == 1.0);
  }
  CHECK_THROWS_AS(make_eta(1.0, 0.5), Error);
  CHECK_THROWS_AS(CutoffPair(0.5, 1.0, 0.8), Error);
}

TEST_CASE("chi is an indicator") {
  const CutoffPair c(0.5, 1.0, 1.5);
  CHECK(c.chi(1.5) == 1.0);
  CHECK(c.chi(-1.5) == 1.0);
  CHECK(c.chi(1.5000001) == 0.0);
  CHECK(c.chi(0.0) == 1.0);
}
