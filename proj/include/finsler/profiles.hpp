#pragma once

#include <cmath>
#include <optional>
#include <variant>

#include <json.hpp>

namespace finsler {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Round-sphere profile f0(t) = 2e^t / (1 + e^{2t}) = sech(t), evaluated
/// through e^{-|t|} so that it never overflows.
double eval_f0(double t) noexcept;
double eval_f0_derivative(double t) noexcept;

/// h(t) = 2 arctan(e^t) - pi/2, the latitude of the point at height t.
/// Satisfies h' = f0 and cos(h) = f0.
double eval_h(double t) noexcept;

/// Inverse of f0 restricted to [0, inf): the unique t >= 0 with f0(t) = c,
/// for c in (0, 1].
double f0_inverse(double c);

/// C-infinity step: 0 for s <= 0, 1 for s >= 1, built from exp(-1/x).
double smooth_step(double s) noexcept;
double smooth_step_derivative(double s) noexcept;

/// A positive function f(x2) defining the conformal metric f^2 <.,.> on the
/// cylinder R/2piZ x R (or on a torus when f is periodic).
class RotationalProfile {
 public:
  struct RoundSphere {};
  struct Periodic {
    double period;
    double mean;
    double amplitude;
  };
  struct Spliced {
    double period;
    double splice;
  };
  using Kind = std::variant<RoundSphere, Periodic, Spliced>;

  static RotationalProfile round_sphere() { return RotationalProfile(RoundSphere{}); }
  /// mean + amplitude * cos(2 pi x / period); requires |amplitude| < mean.
  static RotationalProfile periodic(double period, double mean, double amplitude);

  double value(double x2) const noexcept;
  double derivative(double x2) const noexcept;

  /// Period in x2, empty for the sphere model.
  std::optional<double> period() const noexcept;
  bool is_round_sphere() const noexcept { return std::holds_alternative<RoundSphere>(kind_); }
  const Kind& kind() const noexcept { return kind_; }

  /// Minimum over one period (or the infimum 0 for the sphere), found by a
  /// dense scan refined with golden-section search.
  double minimum() const;

  nlohmann::json to_json() const;
  static RotationalProfile from_json(const nlohmann::json& j);

 private:
  explicit RotationalProfile(Kind kind) : kind_(kind) {}
  friend RotationalProfile make_spliced_profile(double, double);

  Kind kind_;
};

/// Periodic profile of period L equal to f0 on [-L/2 + eps, L/2 - eps]. The
/// bridge on [L/2 - eps, L/2 + eps] blends f0(x) into f0(x - L) with
/// smooth_step, so the jets match to all orders at both ends.
RotationalProfile make_spliced_profile(double period, double splice);

/// Smooth monotone step eta with eta = 0 for t <= f0(a1) and eta = 1 for
/// t >= f0(a0).
class Eta {
 public:
  Eta(double a0, double a1);

  double operator()(double t) const noexcept;
  double derivative(double t) const noexcept;
  double lower() const noexcept { return lo_; }
  double upper() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

Eta make_eta(double a0, double a1);

/// The data (a0, a1, b) of the Katok cut-off with its step eta and the
/// indicator chi of |x2| <= b.
struct CutoffPair {
  double a0;
  double a1;
  double b;

  CutoffPair(double a0_, double a1_, double b_);

  const Eta& eta() const noexcept { return eta_; }
  double chi(double x2) const noexcept { return std::abs(x2) <= b ? 1.0 : 0.0; }

 private:
  Eta eta_;
};

}  // namespace finsler
