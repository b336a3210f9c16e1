#pragma once

// Independent reference solutions used by the tests. Nothing here calls the
// library's integrator.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

#include "finsler/metrics.hpp"

namespace oracle {

/// Geodesic flow of the round unit sphere in the (x1, x2) chart with
/// latitude h(x2), computed as a great-circle rotation in R^3. x1 is
/// unwrapped by substepping so the result is a lift.
inline finsler::CotangentPoint great_circle(const finsler::CotangentPoint& p, double t, int substeps_per_radian = 64) {
  using std::cos;
  using std::sin;
  const double f = 1.0 / std::cosh(p.x2);
  const double n = std::hypot(p.xi1, p.xi2);
  const double H = n / f;
  const double th = 2.0 * std::atan(std::exp(p.x2)) - M_PI / 2.0;
  const std::array<double, 3> P{cos(th) * cos(p.x1), cos(th) * sin(p.x1), sin(th)};
  const std::array<double, 3> east{-sin(p.x1), cos(p.x1), 0.0};
  const std::array<double, 3> north{-sin(th) * cos(p.x1), -sin(th) * sin(p.x1), cos(th)};
  std::array<double, 3> V{};
  for (int i = 0; i < 3; ++i) V[i] = (p.xi1 * east[i] + p.xi2 * north[i]) / n;
  // The field dH/dxi is degree-0 homogeneous, so orbits have unit speed on
  // every level and time equals arclength.
  const double s = t;
  const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(s) * substeps_per_radian)));
  double x1 = p.x1;
  double prev = p.x1;
  std::array<double, 3> Q{};
  std::array<double, 3> W{};
  for (int k = 1; k <= steps; ++k) {
    const double sk = s * k / steps;
    for (int i = 0; i < 3; ++i) {
      Q[i] = P[i] * cos(sk) + V[i] * sin(sk);
      W[i] = -P[i] * sin(sk) + V[i] * cos(sk);
    }
    const double a = std::atan2(Q[1], Q[0]);
    double d = a - prev;
    d -= 2.0 * M_PI * std::round(d / (2.0 * M_PI));
    x1 += d;
    prev = a;
  }
  const double th1 = std::asin(std::clamp(Q[2], -1.0, 1.0));
  const double x2 = std::asinh(std::tan(th1));
  const std::array<double, 3> e1{-sin(x1), cos(x1), 0.0};
  const std::array<double, 3> n1{-sin(th1) * cos(x1), -sin(th1) * sin(x1), cos(th1)};
  const double f1 = std::cos(th1);
  const double ve = W[0] * e1[0] + W[1] * e1[1] + W[2] * e1[2];
  const double vn = W[0] * n1[0] + W[1] * n1[1] + W[2] * n1[2];
  return {x1, x2, H * f1 * ve, H * f1 * vn};
}

/// Root of g on [lo, hi] by plain bisection; g(lo) and g(hi) must differ in
/// sign.
inline double bisect(const std::function<double(double)>& g, double lo, double hi) {
  double glo = g(lo);
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm > 0) == (glo > 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Turning height of a geodesic of H0 with Clairaut ratio c = xi1 / H0:
/// the x* >= 0 with f0(x*) = c, found by bisection on sech.
inline double turning_point(double c) {
  return bisect([c](double x) { return 1.0 / std::cosh(x) - c; }, 0.0, 50.0);
}

}  // namespace oracle
