#include <doctest.h>

#include <cmath>

#include "finsler/dop853.hpp"

using namespace finsler;

TEST_CASE("DOP853 on the harmonic oscillator") {
  using I = Dop853<2>;
  I integ([](double, const I::Vector& y) { return I::Vector{y[1], -y[0]}; }, {1e-12, 1e-12});
  integ.reset(0.0, {1.0, 0.0});
  double max_dense_err = 0.0;
  while (integ.time() < 20.0) {
    integ.step(20.0);
    for (int k = 1; k < 4; ++k) {
      const double t = integ.previous_time() + (integ.time() - integ.previous_time()) * k / 4.0;
      const auto y = integ.dense(t);
      max_dense_err = std::max(max_dense_err, std::abs(y[0] - std::cos(t)));
    }
  }
  CHECK(integ.time() == 20.0);
  CHECK(std::abs(integ.state()[0] - std::cos(20.0)) < 1e-10);
  CHECK(std::abs(integ.state()[1] + std::sin(20.0)) < 1e-10);
  CHECK(max_dense_err < 1e-9);
  CHECK(integ.dense(integ.time())[0] == doctest::Approx(integ.state()[0]).epsilon(1e-14));

  // Backward to the start.
  while (integ.time() > 0.0) integ.step(0.0);
  CHECK(std::abs(integ.state()[0] - 1.0) < 1e-9);
}

TEST_CASE("DOP853 eighth-order convergence") {
  using I = Dop853<1>;
  // y' = y cos t, y = exp(sin t); a fixed step cap makes error ~ h^8.
  auto run = [](double h) {
    I integ([](double t, const I::Vector& y) { return I::Vector{y[0] * std::cos(t)}; }, {1.0, 1.0, h});
    integ.reset(0.0, {1.0});
    while (integ.time() < 4.0) integ.step(4.0);
    return std::abs(integ.state()[0] - std::exp(std::sin(4.0)));
  };
  const double e1 = run(0.4);
  const double e2 = run(0.2);
  CHECK(std::log2(e1 / e2) > 6.5);
}

TEST_CASE("DOP853 step failure") {
  using I = Dop853<1>;
  I integ([](double, const I::Vector& y) { return I::Vector{y[0] * y[0]}; }, {1e-10, 1e-10, 1.0, 100000});
  integ.reset(0.0, {1.0});
  CHECK_THROWS_AS(
      [&] {
        while (integ.time() < 2.0) integ.step(2.0);
      }(),
      Error);
}
