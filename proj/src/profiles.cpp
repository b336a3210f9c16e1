#include "finsler/profiles.hpp"

#include <algorithm>
#include <cmath>

#include "finsler/error.hpp"

namespace finsler {

double eval_f0(double t) noexcept {
  const double e = std::exp(-std::abs(t));
  return 2.0 * e / (1.0 + e * e);
}

double eval_f0_derivative(double t) noexcept { return -eval_f0(t) * std::tanh(t); }

double eval_h(double t) noexcept {
  // 2 atan(tanh(t/2)) is the same function, written so that h(-t) = -h(t)
  // holds bit-exactly.
  return 2.0 * std::atan(std::tanh(0.5 * t));
}

double f0_inverse(double c) {
  if (!(c > 0.0 && c <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "f0_inverse needs c in (0, 1]");
  }
  return std::acosh(1.0 / c);
}

namespace {

double bump(double x) noexcept { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }

double bump_derivative(double x) noexcept { return x > 0.0 ? std::exp(-1.0 / x) / (x * x) : 0.0; }

}  // namespace

double smooth_step(double s) noexcept {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  const double p = bump(s);
  const double q = bump(1.0 - s);
  return p / (p + q);
}

double smooth_step_derivative(double s) noexcept {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  const double p = bump(s);
  const double q = bump(1.0 - s);
  const double dp = bump_derivative(s);
  const double dq = -bump_derivative(1.0 - s);
  const double den = p + q;
  return (dp * q - p * dq) / (den * den);
}

RotationalProfile RotationalProfile::periodic(double period, double mean, double amplitude) {
  if (!(period > 0.0) || !(mean > std::abs(amplitude))) {
    throw Error(ErrorKind::InvalidArgument, "periodic profile needs period > 0 and mean > |amplitude|");
  }
  return RotationalProfile(Periodic{period, mean, amplitude});
}

RotationalProfile make_spliced_profile(double period, double splice) {
  if (!(period > 0.0) || !(splice > 0.0) || !(splice < period / 4.0)) {
    throw Error(ErrorKind::InvalidSplice, "need 0 < eps < L/4");
  }
  RotationalProfile profile(RotationalProfile::Spliced{period, splice});
  // Both blended branches are positive, but guard against underflow for
  // absurdly long periods.
  const int n = 4096;
  for (int i = 0; i <= n; ++i) {
    const double x = period / 2.0 - splice + 2.0 * splice * i / n;
    if (!(profile.value(x) > 0.0)) {
      throw Error(ErrorKind::InvalidSplice, "bridge loses positivity");
    }
  }
  return profile;
}

namespace {

struct SplicedEval {
  double value;
  double derivative;
};

SplicedEval eval_spliced(const RotationalProfile::Spliced& s, double x) noexcept {
  const double lo = -s.period / 2.0 + s.splice;
  const double xr = x - s.period * std::floor((x - lo) / s.period);
  const double join = s.period / 2.0 - s.splice;
  if (xr <= join) return {eval_f0(xr), eval_f0_derivative(xr)};
  const double width = 2.0 * s.splice;
  const double sigma = (xr - join) / width;
  const double w = smooth_step(sigma);
  const double dw = smooth_step_derivative(sigma) / width;
  const double left = eval_f0(xr);
  const double right = eval_f0(xr - s.period);
  return {(1.0 - w) * left + w * right,
          (1.0 - w) * eval_f0_derivative(xr) + w * eval_f0_derivative(xr - s.period) + dw * (right - left)};
}

}  // namespace

double RotationalProfile::value(double x2) const noexcept {
  return std::visit(
      [x2](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, RoundSphere>) {
          return eval_f0(x2);
        } else if constexpr (std::is_same_v<K, Periodic>) {
          return k.mean + k.amplitude * std::cos(kTwoPi * x2 / k.period);
        } else {
          return eval_spliced(k, x2).value;
        }
      },
      kind_);
}

double RotationalProfile::derivative(double x2) const noexcept {
  return std::visit(
      [x2](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, RoundSphere>) {
          return eval_f0_derivative(x2);
        } else if constexpr (std::is_same_v<K, Periodic>) {
          const double w = kTwoPi / k.period;
          return -k.amplitude * w * std::sin(w * x2);
        } else {
          return eval_spliced(k, x2).derivative;
        }
      },
      kind_);
}

std::optional<double> RotationalProfile::period() const noexcept {
  if (const auto* p = std::get_if<Periodic>(&kind_)) return p->period;
  if (const auto* s = std::get_if<Spliced>(&kind_)) return s->period;
  return std::nullopt;
}

double RotationalProfile::minimum() const {
  const auto per = period();
  if (!per) return 0.0;
  const int n = 4096;
  int best = 0;
  double best_value = value(0.0);
  for (int i = 1; i < n; ++i) {
    const double v = value(*per * i / n);
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  // Golden-section refinement on the bracketing cells.
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = *per * (best - 1) / n;
  double b = *per * (best + 1) / n;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  for (int it = 0; it < 80; ++it) {
    if (value(c) < value(d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  return std::min(best_value, value(0.5 * (a + b)));
}

nlohmann::json RotationalProfile::to_json() const {
  return std::visit(
      [](const auto& k) -> nlohmann::json {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, RoundSphere>) {
          return {{"kind", "round_sphere"}};
        } else if constexpr (std::is_same_v<K, Periodic>) {
          return {{"kind", "periodic"}, {"L", k.period}, {"mean", k.mean}, {"amplitude", k.amplitude}};
        } else {
          return {{"kind", "spliced"}, {"L", k.period}, {"eps", k.splice}};
        }
      },
      kind_);
}

RotationalProfile RotationalProfile::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw Error(ErrorKind::ConfigInvalid, "profile.kind: expected a string");
  }
  const auto kind = j["kind"].get<std::string>();
  auto number = [&j](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw Error(ErrorKind::ConfigInvalid, std::string("profile.") + key + ": expected a number");
    }
    return j[key].get<double>();
  };
  if (kind == "round_sphere") return round_sphere();
  if (kind == "spliced") return make_spliced_profile(number("L"), number("eps"));
  if (kind == "periodic") return periodic(number("L"), number("mean"), number("amplitude"));
  throw Error(ErrorKind::ConfigInvalid, "profile.kind: unknown kind '" + kind + "'");
}

Eta::Eta(double a0, double a1) {
  if (!(a0 > 0.0) || !(a0 < a1)) {
    throw Error(ErrorKind::InvalidBand, "need 0 < a0 < a1");
  }
  lo_ = eval_f0(a1);
  hi_ = eval_f0(a0);
}

double Eta::operator()(double t) const noexcept {
  if (t <= lo_) return 0.0;
  if (t >= hi_) return 1.0;
  return smooth_step((t - lo_) / (hi_ - lo_));
}

double Eta::derivative(double t) const noexcept {
  if (t <= lo_ || t >= hi_) return 0.0;
  return smooth_step_derivative((t - lo_) / (hi_ - lo_)) / (hi_ - lo_);
}

Eta make_eta(double a0, double a1) { return Eta(a0, a1); }

CutoffPair::CutoffPair(double a0_, double a1_, double b_) : a0(a0_), a1(a1_), b(b_), eta_(a0_, a1_) {
  if (!(a1_ < b_)) {
    throw Error(ErrorKind::InvalidBand, "need a1 < b");
  }
}

}  // namespace finsler
